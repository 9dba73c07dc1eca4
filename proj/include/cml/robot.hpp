#pragma once

#include <stdexcept>
#include <string>

#include "cml/types.hpp"

namespace cml {

/// Physical parameters of the single-rigid-body model. Foothold
/// references are expressed in the body frame; +x forward, +y left.
struct RobotParams {
  double mass = 12.0;               // kg
  Mat3 inertia = Mat3::Identity();  // body frame, kg m^2
  LegVec3 r_ref;                    // default foothold offsets, body frame
  double l_max = 0.40;              // maximum leg length, m
  double p_z_nominal = 0.30;        // nominal body height, m
  double g = 9.81;                  // gravity magnitude, m/s^2

  Mat3 inertia_inv() const { return inertia.inverse(); }

  bool valid() const {
    if (!(mass > 0.0) || !(l_max > p_z_nominal) || !(p_z_nominal > 0.0))
      return false;
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    return es.eigenvalues().minCoeff() > 0.0;
  }
};

inline LegVec3 default_footholds(double x, double y, double z) {
  // FL, FR, RL, RR
  return {Vec3(x, y, z), Vec3(x, -y, z), Vec3(-x, y, z), Vec3(-x, -y, z)};
}

inline RobotParams a1_params() {
  RobotParams p;
  p.mass = 12.0;
  p.inertia = Vec3(0.08, 0.28, 0.30).asDiagonal();
  p.p_z_nominal = 0.30;
  p.l_max = 0.40;
  p.r_ref = default_footholds(0.18, 0.13, -p.p_z_nominal);
  return p;
}

inline RobotParams laikago_params() {
  RobotParams p;
  p.mass = 13.0;
  p.inertia = Vec3(0.10, 0.30, 0.32).asDiagonal();
  p.p_z_nominal = 0.40;
  p.l_max = 0.50;
  p.r_ref = default_footholds(0.21, 0.12, -p.p_z_nominal);
  return p;
}

inline RobotParams robot_preset(const std::string& name) {
  if (name == "a1") return a1_params();
  if (name == "laikago") return laikago_params();
  throw std::invalid_argument("unknown robot preset: " + name);
}

}  // namespace cml
