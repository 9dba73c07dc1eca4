#pragma once

#include <utility>

#include "cml/robot.hpp"
#include "cml/so3.hpp"
#include "cml/types.hpp"

namespace cml {

/// Rigid-body state. Angular velocity lives in the body frame, which is
/// the frame the gyroscopic term and the torque projection below expect.
struct CentroidalState {
  Vec3 p = Vec3::Zero();     // position, world
  Vec3 pdot = Vec3::Zero();  // linear velocity, world
  Mat3 R = Mat3::Identity(); // body-to-world
  Vec3 omega = Vec3::Zero(); // angular velocity, body frame

  bool finite() const {
    return p.allFinite() && pdot.allFinite() && R.allFinite() &&
           omega.allFinite();
  }
};

/// Per-leg contact point and applied ground reaction force, both world
/// frame. Swing legs must carry exactly zero force.
struct FootState {
  LegVec3 p{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  LegVec3 f{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

struct Wrench {
  Vec3 force = Vec3::Zero();   // world, N
  Vec3 torque = Vec3::Zero();  // world, N m, about the COM
};

inline Wrench net_wrench(const CentroidalState& state, const FootState& feet,
                         const RobotParams& params) {
  Wrench w;
  for (int i = 0; i < kNumLegs; ++i) {
    w.force += feet.f[i];
    const Vec3 r = feet.p[i] - state.p;
    w.torque += hat(r) * feet.f[i];
  }
  w.force.z() -= params.mass * params.g;
  return w;
}

/// Explicit Euler step. All right-hand sides are evaluated on the input
/// state; the orientation update goes through the exponential map so R
/// stays on SO(3) without re-orthonormalization.
inline CentroidalState euler_step(const CentroidalState& state,
                                  const Wrench& net, const RobotParams& params,
                                  double dt) {
  CentroidalState next;
  next.p = state.p + state.pdot * dt;
  next.pdot = state.pdot + net.force / params.mass * dt;
  next.R = state.R * exp_so3(state.omega * dt);
  const Vec3 body_torque = state.R.transpose() * net.torque;
  const Vec3 gyro = hat(state.omega) * (params.inertia * state.omega);
  next.omega = state.omega + params.inertia_inv() * (body_torque - gyro) * dt;
  return next;
}

}  // namespace cml
