#pragma once

#include <array>
#include <vector>

#include "cml/qp.hpp"
#include "cml/robot.hpp"
#include "cml/sim.hpp"
#include "cml/so3.hpp"
#include "cml/types.hpp"

namespace cml {

/// Cost and constraint parameters for the force-transcription QP.
struct QpWeights {
  Vec6 q_diag = (Vec6() << 1.0, 1.0, 10.0, 5.0, 5.0, 5.0).finished();
  double lambda_reg = 1e-4;  // force regularization
  double mu = 0.6;           // friction coefficient
  double f_z_min = 1.0;      // N, minimum stance normal force
};

/// Commanded body acceleration: linear part in world frame, angular
/// part in body frame (the frame the omega dynamics integrate in).
struct DesiredAccel {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
};

using StanceMask = std::array<bool, kNumLegs>;

enum class GrfStatus { Ok, Ballistic, MaxIter, Infeasible };

struct GrfSolution {
  Vec12 forces = Vec12::Zero();  // 4 x 3, world frame; swing legs exactly 0
  StanceMask stance{};
  GrfStatus status = GrfStatus::Ok;
  double qp_gap = 0.0;
  int qp_iterations = 0;

  Vec3 leg_force(int leg) const { return forces.segment<3>(3 * leg); }
};

/// Linear map from stacked foot forces to body acceleration plus the
/// force-independent bias, so achieved = A f + bias. The gyroscopic term
/// lives in the bias; with f = 0 the body free-falls and spins per the
/// Euler equations, exactly matching euler_step.
struct AccelMap {
  Eigen::Matrix<double, 6, 12> A;
  Vec6 bias;
};

inline AccelMap accel_map(const CentroidalState& state, const LegVec3& feet,
                          const RobotParams& params) {
  AccelMap map;
  map.A.setZero();
  const Mat3 inertia_inv = params.inertia_inv();
  const Mat3 rt = state.R.transpose();
  for (int i = 0; i < kNumLegs; ++i) {
    map.A.block<3, 3>(0, 3 * i) = Mat3::Identity() / params.mass;
    map.A.block<3, 3>(3, 3 * i) = inertia_inv * rt * hat(feet[i] - state.p);
  }
  map.bias.head<3>() = Vec3(0.0, 0.0, -params.g);
  map.bias.tail<3>() =
      -inertia_inv * (hat(state.omega) * (params.inertia * state.omega));
  return map;
}

inline Vec6 achieved_accel(const Vec12& forces, const CentroidalState& state,
                           const LegVec3& feet, const RobotParams& params) {
  const AccelMap map = accel_map(state, feet, params);
  return map.A * forces + map.bias;
}

namespace detail {

/// QP over stance-leg forces only; swing columns are eliminated since
/// their forces are structurally zero.
inline DenseQp build_grf_qp(const DesiredAccel& a_d, const AccelMap& map,
                            const StanceMask& stance, const QpWeights& w,
                            double total_weight) {
  int ns = 0;
  for (bool s : stance) ns += s ? 1 : 0;
  const int n = 3 * ns;
  Eigen::Matrix<double, 6, Eigen::Dynamic> a_stance(6, n);
  int col = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!stance[i]) continue;
    a_stance.middleCols<3>(3 * col) = map.A.middleCols<3>(3 * i);
    ++col;
  }

  DenseQp qp;
  const Vec6 err = map.bias - a_d.stacked();
  qp.H = 2.0 * (a_stance.transpose() * w.q_diag.asDiagonal() * a_stance +
                w.lambda_reg * MatX::Identity(n, n));
  qp.c = 2.0 * a_stance.transpose() * (w.q_diag.asDiagonal() * err);

  // per stance leg: f_z >= f_z_min and the four friction-pyramid rows
  qp.G = MatX::Zero(5 * ns, n);
  qp.h = VecX::Zero(5 * ns);
  for (int k = 0; k < ns; ++k) {
    const int xc = 3 * k, yc = 3 * k + 1, zc = 3 * k + 2;
    const int r = 5 * k;
    qp.G(r, zc) = -1.0;
    qp.h(r) = -w.f_z_min;
    qp.G(r + 1, xc) = 1.0;
    qp.G(r + 1, zc) = -w.mu;
    qp.G(r + 2, xc) = -1.0;
    qp.G(r + 2, zc) = -w.mu;
    qp.G(r + 3, yc) = 1.0;
    qp.G(r + 3, zc) = -w.mu;
    qp.G(r + 4, yc) = -1.0;
    qp.G(r + 4, zc) = -w.mu;
  }

  // equal vertical force split is strictly inside the cone
  VecX start = VecX::Zero(n);
  for (int k = 0; k < ns; ++k)
    start(3 * k + 2) = std::max(total_weight / ns, 2.0 * w.f_z_min);
  qp.interior_point = start;
  return qp;
}

inline Vec12 expand_forces(const VecX& stance_forces,
                           const StanceMask& stance) {
  Vec12 f = Vec12::Zero();
  int col = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!stance[i]) continue;
    f.segment<3>(3 * i) = stance_forces.segment<3>(3 * col);
    ++col;
  }
  return f;
}

}  // namespace detail

/// Transcribes a desired body acceleration into ground reaction forces.
/// With no stance legs the body is ballistic and the only admissible
/// force set is zero.
inline GrfSolution transcribe(const DesiredAccel& a_d,
                              const CentroidalState& state,
                              const LegVec3& footholds,
                              const StanceMask& stance,
                              const RobotParams& params, const QpWeights& w,
                              double tol = 1e-8, int max_iter = 30) {
  GrfSolution sol;
  sol.stance = stance;
  int ns = 0;
  for (bool s : stance) ns += s ? 1 : 0;
  if (ns == 0) {
    sol.status = GrfStatus::Ballistic;
    return sol;
  }
  const AccelMap map = accel_map(state, footholds, params);
  const DenseQp qp = detail::build_grf_qp(a_d, map, stance, w,
                                          params.mass * params.g);
  const QpSolution qps = solve_qp(qp, tol, max_iter);
  sol.forces = detail::expand_forces(qps.x, stance);
  sol.qp_gap = qps.gap;
  sol.qp_iterations = qps.iterations;
  switch (qps.status) {
    case QpStatus::Optimal: sol.status = GrfStatus::Ok; break;
    case QpStatus::MaxIter: sol.status = GrfStatus::MaxIter; break;
    case QpStatus::Infeasible: sol.status = GrfStatus::Infeasible; break;
  }
  return sol;
}

struct TranscriptionRequest {
  DesiredAccel a_d;
  CentroidalState state;
  LegVec3 footholds;
  StanceMask stance;
};

/// Batch transcription grouped by stance pattern so each solve_qp_batch
/// call sees homogeneous dimensions. Output order matches input order.
inline std::vector<GrfSolution> transcribe_batch(
    const std::vector<TranscriptionRequest>& reqs, const RobotParams& params,
    const QpWeights& w, double tol = 1e-8, int max_iter = 30,
    int num_threads = 1) {
  std::vector<GrfSolution> out(reqs.size());
  std::array<std::vector<std::size_t>, 16> groups;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    int pattern = 0;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (reqs[i].stance[leg]) pattern |= 1 << leg;
    if (pattern == 0) {
      out[i].status = GrfStatus::Ballistic;
      out[i].stance = reqs[i].stance;
    } else {
      groups[pattern].push_back(i);
    }
  }
  for (int pattern = 1; pattern < 16; ++pattern) {
    const auto& idx = groups[pattern];
    if (idx.empty()) continue;
    std::vector<DenseQp> qps;
    qps.reserve(idx.size());
    for (std::size_t i : idx) {
      const auto& r = reqs[i];
      qps.push_back(detail::build_grf_qp(r.a_d,
                                         accel_map(r.state, r.footholds, params),
                                         r.stance, w,
                                         params.mass * params.g));
    }
    const auto sols = solve_qp_batch(qps, tol, max_iter, num_threads);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& r = reqs[idx[k]];
      GrfSolution& g = out[idx[k]];
      g.stance = r.stance;
      g.forces = detail::expand_forces(sols[k].x, r.stance);
      g.qp_gap = sols[k].gap;
      g.qp_iterations = sols[k].iterations;
      switch (sols[k].status) {
        case QpStatus::Optimal: g.status = GrfStatus::Ok; break;
        case QpStatus::MaxIter: g.status = GrfStatus::MaxIter; break;
        case QpStatus::Infeasible: g.status = GrfStatus::Infeasible; break;
      }
    }
  }
  return out;
}

}  // namespace cml
