#include "cml/pd.hpp"

#include <gtest/gtest.h>

#include "cml/metrics.hpp"

namespace cml {
namespace {

TaskConfig pd_task() {
  TaskConfig cfg;
  cfg.p_z_desired = a1_params().p_z_nominal;
  cfg.v_x_desired = 0.3;
  return cfg;
}

TEST(Pd, ZeroErrorGivesZeroCommand) {
  TaskConfig cfg = pd_task();
  CentroidalState s;
  s.p = Vec3(1.7, 0.0, cfg.p_z_desired);  // x error is untracked
  s.pdot = Vec3(cfg.v_x_desired, 0, 0);
  const DesiredAccel a = pd_accel(s, cfg, default_pd_gains());
  EXPECT_LT(a.linear.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(a.angular.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pd, HeightErrorArithmetic) {
  TaskConfig cfg = pd_task();
  PdGains g;
  g.kp(2) = 100.0;
  g.kd(2) = 10.0;
  CentroidalState s;
  s.p = Vec3(0, 0, cfg.p_z_desired - 0.05);
  const DesiredAccel a = pd_accel(s, cfg, g);
  EXPECT_NEAR(a.linear.z(), 5.0, 1e-12);
}

TEST(Pd, RollErrorIsRestoring) {
  TaskConfig cfg = pd_task();
  PdGains g;
  g.kp(3) = 50.0;
  CentroidalState s;
  s.p = Vec3(0, 0, cfg.p_z_desired);
  s.pdot = Vec3(cfg.v_x_desired, 0, 0);
  s.R = exp_so3(Vec3(0.1, 0, 0));
  const DesiredAccel a = pd_accel(s, cfg, g);
  EXPECT_NEAR(a.angular.x(), -5.0, 1e-9);
}

TEST(Pd, OutputIsAffineInErrors) {
  TaskConfig cfg = pd_task();
  const PdGains gains = default_pd_gains();
  CentroidalState s1;
  s1.p = Vec3(0, 0.02, cfg.p_z_desired + 0.03);
  s1.pdot = Vec3(cfg.v_x_desired + 0.1, -0.05, 0.02);
  s1.R = exp_so3(Vec3(0.04, 0, 0));
  s1.omega = Vec3(0.1, -0.2, 0.05);

  CentroidalState s2 = s1;  // doubled errors
  s2.p = Vec3(0, 0.04, cfg.p_z_desired + 0.06);
  s2.pdot = Vec3(cfg.v_x_desired + 0.2, -0.1, 0.04);
  s2.R = exp_so3(Vec3(0.08, 0, 0));
  s2.omega = Vec3(0.2, -0.4, 0.1);

  const Vec6 a1v = pd_accel(s1, cfg, gains).stacked();
  const Vec6 a2v = pd_accel(s2, cfg, gains).stacked();
  EXPECT_LT((a2v - 2.0 * a1v).cwiseAbs().maxCoeff(), 1e-9);
}

// Tuned-gain regression: the PD controller piped through the QP follows
// a trot on flat ground for 10 s with the body height inside +-0.1 m.
TEST(Pd, ClosedLoopTrotHoldsHeightTenSeconds) {
  TaskConfig cfg = pd_task();
  cfg.gait = trot_gait();
  const RolloutResult r = run_rollout(pd_controller(default_pd_gains()),
                                      a1_params(), cfg, 10.0, 7);
  EXPECT_TRUE(r.survived) << "failed at " << r.survival_seconds << " s";
  for (const auto& row : r.traj.rows) {
    EXPECT_NEAR(row.p.z(), cfg.p_z_desired, 0.1);
  }
}

}  // namespace
}  // namespace cml
