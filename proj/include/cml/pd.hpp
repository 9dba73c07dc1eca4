#pragma once

#include <string>

#include "cml/env.hpp"
#include "cml/grf.hpp"
#include "cml/sim.hpp"
#include "cml/so3.hpp"
#include "cml/types.hpp"

namespace cml {

/// Diagonal gains over the stacked [position; orientation] and
/// [linear velocity; angular velocity] errors. `v_ramp_rate` optionally
/// slews the forward-velocity target from zero at episode start
/// (disabled by default; the low forward gain already approaches the
/// target gently).
struct PdGains {
  Vec6 kp = Vec6::Zero();
  Vec6 kd = Vec6::Zero();
  double v_ramp_rate = 0.0;  // m/s^2, <= 0 disables the ramp
};

/// a_d = kp (.) [p_d - p; -euler] + kd (.) [pdot_d - pdot; -omega]
/// with p_d = [0, 0, p_z_d] and pdot_d = [v_x_d, 0, 0]. The x position
/// gain stays zero: the controller tracks forward velocity, not
/// displacement.
inline DesiredAccel pd_accel(const CentroidalState& state,
                             const TaskConfig& cfg, const PdGains& gains) {
  Vec6 err_p;
  err_p << 0.0, 0.0 - state.p.y(), cfg.p_z_desired - state.p.z(),
      -euler_zyx(state.R);
  Vec6 err_d;
  err_d << cfg.v_x_desired - state.pdot.x(), -state.pdot.y(), -state.pdot.z(),
      -state.omega;
  const Vec6 a = gains.kp.cwiseProduct(err_p) + gains.kd.cwiseProduct(err_d);
  DesiredAccel out;
  out.linear = a.head<3>();
  out.angular = a.tail<3>();
  return out;
}

/// Hand-tuned stabilizing gains for the trot presets. The forward
/// velocity gain stays low: footholds are planned a stance ahead from
/// the instantaneous velocity, so hard velocity transients destabilize
/// the placement loop.
inline PdGains default_pd_gains() {
  PdGains g;
  g.kp << 0.0, 0.0, 120.0, 200.0, 200.0, 60.0;
  g.kd << 0.8, 12.0, 24.0, 25.0, 25.0, 10.0;
  return g;
}

inline PdGains pd_gains_preset(const std::string& robot_name) {
  (void)robot_name;  // both presets stabilize with the same set
  return default_pd_gains();
}

/// Raw action for LocomotionEnv::step: the PD acceleration normalized
/// by the action bounds (the env re-scales and clips).
inline Vec6 pd_raw_action(const CentroidalState& state, const TaskConfig& cfg,
                          const PdGains& gains) {
  const DesiredAccel a = pd_accel(state, cfg, gains);
  Vec6 raw;
  raw.head<3>() = a.linear / cfg.lin_accel_bound;
  raw.tail<3>() = a.angular / cfg.ang_accel_bound;
  return raw;
}

}  // namespace cml
