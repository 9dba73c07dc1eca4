#pragma once

// Test-only reference implementations, kept independent of the library
// code paths they check.

#include <bit>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cml/qp.hpp"
#include "cml/types.hpp"

namespace cml::test {

inline Vec3 cross_by_components(const Vec3& a, const Vec3& b) {
  return Vec3(a(1) * b(2) - a(2) * b(1),
              a(2) * b(0) - a(0) * b(2),
              a(0) * b(1) - a(1) * b(0));
}

struct OracleResult {
  VecX x;
  double objective = std::numeric_limits<double>::infinity();
  bool found = false;
};

namespace detail {

// Equality-constrained KKT solve for active set S:
//   [H  Gs'; Gs  0] [x; nu] = [-c; h_S]
inline std::optional<std::pair<VecX, VecX>> kkt_solve(const DenseQp& qp,
                                                      std::uint32_t mask) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  std::vector<int> rows;
  for (int i = 0; i < m; ++i)
    if (mask & (1u << i)) rows.push_back(i);
  const int k = static_cast<int>(rows.size());
  MatX kkt = MatX::Zero(n + k, n + k);
  VecX rhs(n + k);
  kkt.topLeftCorner(n, n) = qp.H;
  rhs.head(n) = -qp.c;
  for (int j = 0; j < k; ++j) {
    kkt.block(n + j, 0, 1, n) = qp.G.row(rows[j]);
    kkt.block(0, n + j, n, 1) = qp.G.row(rows[j]).transpose();
    rhs(n + j) = qp.h(rows[j]);
  }
  Eigen::FullPivLU<MatX> lu(kkt);
  if (!lu.isInvertible()) return std::nullopt;
  const VecX sol = lu.solve(rhs);
  return std::make_pair(VecX(sol.head(n)), VecX(sol.tail(k)));
}

inline bool primal_feasible(const DenseQp& qp, const VecX& x, double tol) {
  return qp.num_constraints() == 0 || (qp.G * x - qp.h).maxCoeff() <= tol;
}

}  // namespace detail

/// Scans every active set (2^m subsets), keeps primal-feasible
/// candidates, returns the feasible minimum. Use for small m only.
inline OracleResult brute_force_qp(const DenseQp& qp, double feas_tol = 1e-8) {
  OracleResult best;
  const int m = qp.num_constraints();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    auto sol = detail::kkt_solve(qp, mask);
    if (!sol) continue;
    if (!detail::primal_feasible(qp, sol->first, feas_tol)) continue;
    const double obj = qp.objective(sol->first);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = sol->first;
      best.found = true;
    }
  }
  return best;
}

/// Active-set enumeration ordered by subset size with a KKT
/// sufficiency check: the first primal- and dual-feasible candidate of a
/// convex QP is the global optimum. Handles the larger stance instances
/// within the test-time budget.
inline OracleResult active_set_oracle(const DenseQp& qp,
                                      double feas_tol = 1e-8) {
  const int m = qp.num_constraints();
  const int n = qp.num_vars();
  for (int size = 0; size <= std::min(m, n); ++size) {
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
      if (std::popcount(mask) != size) continue;
      auto sol = detail::kkt_solve(qp, mask);
      if (!sol) continue;
      if (!detail::primal_feasible(qp, sol->first, feas_tol)) continue;
      if (sol->second.size() > 0 && sol->second.minCoeff() < -feas_tol)
        continue;
      OracleResult out;
      out.x = sol->first;
      out.objective = qp.objective(sol->first);
      out.found = true;
      return out;
    }
  }
  return brute_force_qp(qp, feas_tol);
}

}  // namespace cml::test
