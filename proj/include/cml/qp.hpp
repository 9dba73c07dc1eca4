#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "cml/types.hpp"

namespace cml {

/// min 1/2 x'Hx + c'x  subject to  Gx <= h, with H symmetric positive
/// definite. `interior_point` optionally supplies a strictly feasible
/// start; without one a slack phase-1 runs first.
struct DenseQp {
  MatX H;
  VecX c;
  MatX G;
  VecX h;
  std::optional<VecX> interior_point;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_constraints() const { return static_cast<int>(G.rows()); }

  double objective(const VecX& x) const {
    return 0.5 * x.dot(H * x) + c.dot(x);
  }
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

struct QpSolution {
  VecX x;
  QpStatus status = QpStatus::Optimal;
  double gap = 0.0;   // final surrogate duality gap
  int iterations = 0;
  std::vector<double> gap_history;  // accepted-iterate gaps, for diagnostics
};

namespace detail {

struct PdState {
  VecX x, lambda, slack;
};

inline VecX residual_stack(const DenseQp& qp, const PdState& st,
                           double inv_t) {
  VecX r(st.x.size() + st.lambda.size());
  r.head(st.x.size()) = qp.H * st.x + qp.c + qp.G.transpose() * st.lambda;
  r.tail(st.lambda.size()) =
      (st.lambda.cwiseProduct(st.slack).array() - inv_t).matrix();
  return r;
}

struct PathOptions {
  // early exit once the last coordinate drops below this (phase-1 hook,
  // where reaching z < 0 is all that matters)
  double stop_when_last_below = -std::numeric_limits<double>::infinity();
  // never let the last coordinate descend below this in one sweep, so
  // phase-1 cannot overshoot to an extreme iterate
  double last_floor = -std::numeric_limits<double>::infinity();
};

/// Primal-dual path following from a strictly feasible start.
inline QpSolution path_follow(const DenseQp& qp, VecX x0, double tol,
                              int max_iter, const PathOptions& opt = {}) {
  const int m = qp.num_constraints();
  constexpr double kMu = 10.0;
  constexpr double kBoundary = 0.995;
  constexpr double kBacktrack = 0.5;
  constexpr double kArmijo = 0.01;

  QpSolution out;
  PdState st;
  st.x = std::move(x0);
  st.slack = qp.h - qp.G * st.x;
  // floor on the multipliers so a start with very loose slacks does not
  // fake a small duality gap and skip the centering phase
  st.lambda = st.slack.cwiseInverse().cwiseMax(1e-2);

  double gap = st.slack.dot(st.lambda);
  out.gap_history.push_back(gap);
  const int last = static_cast<int>(st.x.size()) - 1;
  double r_dual_norm = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iter; ++iter) {
    if (st.x(last) < opt.stop_when_last_below) {
      out.x = st.x;
      out.status = QpStatus::Optimal;
      out.gap = gap;
      out.iterations = iter;
      return out;
    }

    const double inv_t = gap / (kMu * m);
    const VecX r_dual = qp.H * st.x + qp.c + qp.G.transpose() * st.lambda;
    r_dual_norm = r_dual.lpNorm<Eigen::Infinity>();

    if (gap <= tol && r_dual_norm <= 10.0 * tol) {
      out.x = st.x;
      out.status = QpStatus::Optimal;
      out.gap = gap;
      out.iterations = iter;
      return out;
    }

    const VecX r_cent =
        (st.lambda.cwiseProduct(st.slack).array() - inv_t).matrix();
    const VecX lam_over_s = st.lambda.cwiseQuotient(st.slack);

    MatX kkt = qp.H;
    kkt.noalias() += qp.G.transpose() * lam_over_s.asDiagonal() * qp.G;
    Eigen::LLT<MatX> llt(kkt);
    if (llt.info() != Eigen::Success) {
      // ill-conditioned late iterate; fall back to a ridge
      kkt.diagonal().array() += 1e-10 * kkt.diagonal().maxCoeff();
      llt.compute(kkt);
      if (llt.info() != Eigen::Success) break;
    }
    const VecX rhs =
        -r_dual + qp.G.transpose() * r_cent.cwiseQuotient(st.slack);
    const VecX dx = llt.solve(rhs);
    const VecX ds = -(qp.G * dx);
    const VecX dlambda =
        (-r_cent - st.lambda.cwiseProduct(ds)).cwiseQuotient(st.slack);

    // fraction-to-boundary cap keeps lambda and slack strictly positive
    double alpha = 1.0;
    for (int i = 0; i < m; ++i) {
      if (dlambda(i) < 0.0)
        alpha = std::min(alpha, -kBoundary * st.lambda(i) / dlambda(i));
      if (ds(i) < 0.0)
        alpha = std::min(alpha, -kBoundary * st.slack(i) / ds(i));
    }
    if (dx(last) < 0.0 && st.x(last) + alpha * dx(last) < opt.last_floor)
      alpha = (opt.last_floor - st.x(last)) / dx(last);

    const double res_norm = residual_stack(qp, st, inv_t).norm();
    PdState trial;
    bool accepted = false;
    for (int ls = 0; ls < 40 && !accepted; ++ls) {
      trial.x = st.x + alpha * dx;
      trial.lambda = st.lambda + alpha * dlambda;
      trial.slack = qp.h - qp.G * trial.x;
      if (trial.slack.minCoeff() > 0.0 && trial.lambda.minCoeff() > 0.0) {
        const double trial_norm = residual_stack(qp, trial, inv_t).norm();
        const double trial_gap = trial.slack.dot(trial.lambda);
        accepted = trial_norm <= (1.0 - kArmijo * alpha) * res_norm &&
                   trial_gap <= gap;
      }
      if (!accepted) alpha *= kBacktrack;
    }
    if (!accepted) break;  // no admissible step; return best iterate

    st = trial;
    gap = st.slack.dot(st.lambda);
    out.gap_history.push_back(gap);
  }

  out.x = st.x;
  out.status = (gap <= tol && r_dual_norm <= 10.0 * tol) ? QpStatus::Optimal
                                                         : QpStatus::MaxIter;
  out.gap = gap;
  out.iterations = static_cast<int>(out.gap_history.size()) - 1;
  return out;
}

/// Slack phase-1: walk the central path of  min z  s.t. Gx - z <= h
/// (tiny regularization keeps the Hessian SPD) and exit as soon as the
/// iterate reaches z < 0, which certifies a strictly feasible x. The
/// early exit keeps iterates away from the regularized problem's
/// extreme optimum.
inline std::optional<VecX> phase1_interior(const DenseQp& qp, int max_iter) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  DenseQp aug;
  aug.H = MatX::Identity(n + 1, n + 1) * 1e-6;
  aug.c = VecX::Zero(n + 1);
  aug.c(n) = 1.0;
  aug.G = MatX::Zero(m, n + 1);
  aug.G.leftCols(n) = qp.G;
  aug.G.col(n).setConstant(-1.0);
  aug.h = qp.h;
  VecX start = VecX::Zero(n + 1);
  start(n) = std::max(0.0, -qp.h.minCoeff()) + 1.0;
  PathOptions opt;
  opt.stop_when_last_below = -1e-3;
  opt.last_floor = -1.0;  // keeps the certified slack at a sane scale
  const QpSolution sol = path_follow(aug, start, 1e-12, max_iter, opt);
  if (sol.x(n) < -1e-6) return VecX(sol.x.head(n));
  return std::nullopt;
}

}  // namespace detail

/// Primal-dual interior point (path following with fraction-to-boundary
/// 0.995 and residual-decrease backtracking). Dense factorizations;
/// problem sizes here are a dozen variables at most.
inline QpSolution solve_qp(const DenseQp& qp, double tol = 1e-8,
                           int max_iter = 30) {
  const int n = qp.num_vars();
  QpSolution out;

  if (qp.num_constraints() == 0) {
    out.x = qp.H.llt().solve(-qp.c);
    out.status = QpStatus::Optimal;
    return out;
  }

  VecX x0;
  if (qp.interior_point &&
      (qp.h - qp.G * (*qp.interior_point)).minCoeff() > 0.0) {
    x0 = *qp.interior_point;
  } else if ((qp.h.array() > 0.0).all()) {
    x0 = VecX::Zero(n);
  } else {
    auto found = detail::phase1_interior(qp, 100);
    if (!found) {
      out.x = VecX::Zero(n);
      out.status = QpStatus::Infeasible;
      return out;
    }
    x0 = *found;
  }
  return detail::path_follow(qp, std::move(x0), tol, max_iter);
}

/// Instances are independent; results are identical to per-instance
/// solve_qp regardless of batch size, order, or worker count.
inline std::vector<QpSolution> solve_qp_batch(const std::vector<DenseQp>& qps,
                                              double tol = 1e-8,
                                              int max_iter = 30,
                                              int num_threads = 1) {
  std::vector<QpSolution> out(qps.size());
  if (num_threads <= 1 || qps.size() < 2) {
    for (std::size_t i = 0; i < qps.size(); ++i)
      out[i] = solve_qp(qps[i], tol, max_iter);
    return out;
  }
  const int workers =
      std::min<int>(num_threads, static_cast<int>(qps.size()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < qps.size(); i += workers)
        out[i] = solve_qp(qps[i], tol, max_iter);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace cml
