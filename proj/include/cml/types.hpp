#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <array>

namespace cml {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr int kNumLegs = 4;

// Leg index convention: 0 = front-left, 1 = front-right,
// 2 = rear-left, 3 = rear-right.
using LegVec3 = std::array<Vec3, kNumLegs>;

}  // namespace cml
