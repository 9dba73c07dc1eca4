#include "cml/sim.hpp"

#include <gtest/gtest.h>

#include "cml/rng.hpp"

namespace cml {
namespace {

RobotParams test_params() {
  RobotParams p = a1_params();
  return p;
}

TEST(NetWrench, GravityOnlyWhenForcesZero) {
  CentroidalState s;
  s.p = Vec3(0, 0, 0.3);
  FootState feet;
  const Wrench w = net_wrench(s, feet, test_params());
  EXPECT_LT((w.force - Vec3(0, 0, -117.72)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(w.torque, Vec3::Zero());
}

TEST(NetWrench, VerticalForceBelowComHasNoTorque) {
  CentroidalState s;
  s.p = Vec3(0, 0, 0.4);
  FootState feet;
  feet.p[0] = s.p + Vec3(0, 0, -0.4);
  feet.f[0] = Vec3(0, 0, 80.0);
  const Wrench w = net_wrench(s, feet, test_params());
  EXPECT_EQ(w.torque, Vec3::Zero());
}

TEST(NetWrench, SymmetricStanceCancelsTorque) {
  RobotParams params = test_params();
  CentroidalState s;
  s.p = Vec3(0, 0, params.p_z_nominal);
  FootState feet;
  for (int i = 0; i < kNumLegs; ++i) {
    feet.p[i] = s.p + params.r_ref[i];
    feet.f[i] = Vec3(0, 0, params.mass * params.g / 4.0);
  }
  const Wrench w = net_wrench(s, feet, params);
  EXPECT_LT(w.torque.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(w.force.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EulerStep, GravityDropMatchesHandComputation) {
  RobotParams params = test_params();
  CentroidalState s;
  s.p = Vec3(0, 0, 0.3);
  Wrench net;
  net.force = Vec3(0, 0, -params.mass * params.g);
  const CentroidalState next = euler_step(s, net, params, 0.01);
  EXPECT_NEAR(next.pdot.z(), -0.0981, 1e-12);
  EXPECT_EQ(next.p, s.p);  // position uses the pre-step velocity
}

TEST(EulerStep, ZeroOmegaKeepsRotation) {
  CentroidalState s;
  s.R = exp_so3(Vec3(0.2, -0.1, 0.4));
  const CentroidalState next = euler_step(s, Wrench{}, test_params(), 0.01);
  EXPECT_EQ(next.R, s.R);
}

TEST(EulerStep, PrincipalAxisSpinIsTorqueFree) {
  RobotParams params = test_params();  // diagonal inertia
  CentroidalState s;
  s.omega = Vec3(0, 0, 3.0);
  const CentroidalState next = euler_step(s, Wrench{}, params, 0.01);
  EXPECT_LT((next.omega - s.omega).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EulerStep, Determinism) {
  RobotParams params = test_params();
  CentroidalState s;
  s.p = Vec3(0.1, -0.2, 0.35);
  s.pdot = Vec3(0.5, 0.1, -0.05);
  s.R = exp_so3(Vec3(0.05, 0.02, 0.3));
  s.omega = Vec3(0.2, -0.4, 0.1);
  Wrench net;
  net.force = Vec3(1.0, -2.0, 30.0);
  net.torque = Vec3(0.4, 0.1, -0.2);
  const CentroidalState a = euler_step(s, net, params, 0.01);
  const CentroidalState b = euler_step(s, net, params, 0.01);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.pdot, b.pdot);
  EXPECT_EQ(a.R, b.R);
  EXPECT_EQ(a.omega, b.omega);
}

TEST(EulerStep, ZeroNetForceDriftsExactly) {
  RobotParams params = test_params();
  CentroidalState s;
  s.p = Vec3(0, 0, 1.0);
  s.pdot = Vec3(0.8, -0.2, 0.5);
  const double dt = 0.01;
  CentroidalState cur = s;
  for (int k = 0; k < 100; ++k) cur = euler_step(cur, Wrench{}, params, dt);
  // no acceleration: forward Euler reproduces the linear path exactly
  EXPECT_LT((cur.p - (s.p + s.pdot * 1.0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((cur.pdot - s.pdot).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EulerStep, BallisticFollowsParabolaToFirstOrder) {
  RobotParams params = test_params();
  CentroidalState s;
  s.p = Vec3(0, 0, 1.0);
  s.pdot = Vec3(0.8, -0.2, 0.5);
  Wrench net;
  net.force = Vec3(0, 0, -params.mass * params.g);
  const double dt = 0.01;
  CentroidalState cur = s;
  for (int k = 0; k < 100; ++k) cur = euler_step(cur, net, params, dt);
  const double t = 1.0;
  const Vec3 analytic = s.p + s.pdot * t + 0.5 * Vec3(0, 0, -params.g) * t * t;
  // position lags the parabola by the first-order term g*t*dt/2
  const double expected_err = params.g * t * dt / 2.0;
  EXPECT_LT((cur.p - analytic).cwiseAbs().maxCoeff(), expected_err + 1e-9);
  EXPECT_GT((cur.p - analytic).cwiseAbs().maxCoeff(), expected_err - 1e-9);
  // velocity is exact for constant acceleration
  const Vec3 vel_analytic = s.pdot + Vec3(0, 0, -params.g) * t;
  EXPECT_LT((cur.pdot - vel_analytic).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EulerStep, SphericalBodyConservesOmegaNorm) {
  RobotParams params = test_params();
  params.inertia = 0.2 * Mat3::Identity();
  CentroidalState s;
  s.omega = Vec3(1.0, -2.0, 0.5);
  const double n0 = s.omega.norm();
  for (int k = 0; k < 1000; ++k) s = euler_step(s, Wrench{}, params, 0.01);
  EXPECT_NEAR(s.omega.norm(), n0, 1e-12);
}

TEST(EulerStep, RotationStaysOrthonormalOverLongRollouts) {
  RobotParams params = test_params();
  CentroidalState s;
  Rng rng(41);
  for (int k = 0; k < 10000; ++k) {
    Wrench net;
    for (int i = 0; i < 3; ++i) {
      net.force(i) = rng.uniform(-50.0, 50.0);
      net.torque(i) = rng.uniform(-5.0, 5.0);
    }
    net.force.z() += params.mass * params.g;  // keep velocities bounded
    s.pdot.setZero();
    s = euler_step(s, net, params, 0.01);
    s.omega *= 0.99;  // bleed energy so omega stays bounded
  }
  EXPECT_LT(orthonormality_error(s.R), 1e-9);
}

}  // namespace
}  // namespace cml
