#include "cml/mlp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cml/rng.hpp"

namespace cml {
namespace {

void zero_params(PolicyParams& p) {
  for (Layer* l : {&p.a1, &p.a2, &p.a3, &p.c1, &p.c2, &p.c3}) {
    l->w.setZero();
    l->b.setZero();
  }
}

TEST(Mlp, ZeroWeightsGiveZeroOutputs) {
  PolicyParams p = PolicyParams::init(5, 0);
  zero_params(p);
  const auto [mean, value] = policy_forward(p, VecX::Ones(5));
  EXPECT_EQ(mean, VecX::Zero(kActionDim));
  EXPECT_EQ(value, 0.0);
}

TEST(Mlp, HandComputedSingleUnitNetwork) {
  PolicyParams p = PolicyParams::init(1, 0, /*hidden=*/1);
  zero_params(p);
  p.a1.w(0, 0) = 2.0;
  p.a1.b(0) = 0.5;
  p.a2.w(0, 0) = 1.5;
  p.a2.b(0) = -0.2;
  p.a3.w(0, 0) = 0.8;  // only action 0 wired
  p.a3.b(0) = 0.1;
  p.c1.w(0, 0) = -1.0;
  p.c2.w(0, 0) = 2.0;
  p.c2.b(0) = 0.3;
  p.c3.w(0, 0) = 4.0;
  p.c3.b(0) = -1.0;

  const double x = 0.7;
  const double h1 = std::max(0.0, 2.0 * x + 0.5);            // 1.9
  const double h2 = std::max(0.0, 1.5 * h1 - 0.2);           // 2.65
  const double mean0 = std::tanh(0.8 * h2 + 0.1);            // tanh(2.22)
  const double ch1 = std::max(0.0, -1.0 * x);                // 0 (dead)
  const double ch2 = std::max(0.0, 2.0 * ch1 + 0.3);         // 0.3
  const double value = 4.0 * ch2 - 1.0;                      // 0.2

  const auto [mean, v] = policy_forward(p, VecX::Constant(1, x));
  EXPECT_NEAR(mean(0), mean0, 1e-15);
  EXPECT_NEAR(mean(1), 0.0, 1e-15);
  EXPECT_NEAR(v, value, 1e-15);
}

TEST(Mlp, MeanStaysInsideUnitBox) {
  PolicyParams p = PolicyParams::init(6, 3);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    VecX obs(6);
    for (int k = 0; k < 6; ++k) obs(k) = rng.uniform(-50.0, 50.0);
    const auto [mean, value] = policy_forward(p, obs);
    for (int a = 0; a < kActionDim; ++a) {
      EXPECT_GT(mean(a), -1.0);
      EXPECT_LT(mean(a), 1.0);
    }
  }
}

TEST(Mlp, DimensionMismatchThrows) {
  PolicyParams p = PolicyParams::init(4, 0);
  EXPECT_THROW(policy_forward(p, VecX::Zero(5)), std::invalid_argument);
}

TEST(Mlp, LogProbAtMeanMatchesClosedForm) {
  PolicyParams p = PolicyParams::init(3, 2);
  p.log_std << -0.5, 0.1, -1.0, 0.3, -0.2, 0.0;
  const VecX mean = VecX::Constant(kActionDim, 0.37);
  const double lp = gaussian_log_prob(mean, mean, p.log_std);
  const double expected =
      -p.log_std.sum() - 3.0 * std::log(2.0 * M_PI);
  EXPECT_NEAR(lp, expected, 1e-12);
}

TEST(Mlp, SampleStatisticsMatchLogStd) {
  PolicyParams p = PolicyParams::init(3, 7);
  p.log_std.setConstant(-0.7);
  const VecX mean = VecX::Zero(kActionDim);
  Rng rng(123);
  const int n = 100000;
  VecX sum = VecX::Zero(kActionDim), sum_sq = VecX::Zero(kActionDim);
  for (int i = 0; i < n; ++i) {
    const SampleResult s = sample_action(p, mean, rng);
    sum += s.action;
    sum_sq += s.action.cwiseProduct(s.action);
  }
  const double target = std::exp(-0.7);
  for (int a = 0; a < kActionDim; ++a) {
    const double m = sum(a) / n;
    const double sd = std::sqrt(sum_sq(a) / n - m * m);
    EXPECT_NEAR(sd, target, 0.02 * target);
    EXPECT_NEAR(m, 0.0, 0.01);
  }
}

TEST(Mlp, SampleDeterministicGivenRngState) {
  PolicyParams p = PolicyParams::init(3, 9);
  const VecX mean = VecX::Constant(kActionDim, 0.1);
  Rng r1(55), r2(55);
  const SampleResult a = sample_action(p, mean, r1);
  const SampleResult b = sample_action(p, mean, r2);
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.log_prob, b.log_prob);
}

// Collects every scalar parameter for finite-difference sweeps.
std::vector<double*> all_params(PolicyParams& p) {
  std::vector<double*> out;
  for (Layer* l : {&p.a1, &p.a2, &p.a3, &p.c1, &p.c2, &p.c3}) {
    for (int i = 0; i < l->w.size(); ++i) out.push_back(l->w.data() + i);
    for (int i = 0; i < l->b.size(); ++i) out.push_back(l->b.data() + i);
  }
  return out;
}

std::vector<double*> all_grads(PolicyGrads& g) {
  std::vector<double*> out;
  for (LayerGrad* l : {&g.a1, &g.a2, &g.a3, &g.c1, &g.c2, &g.c3}) {
    for (int i = 0; i < l->w.size(); ++i) out.push_back(l->w.data() + i);
    for (int i = 0; i < l->b.size(); ++i) out.push_back(l->b.data() + i);
  }
  return out;
}

TEST(Mlp, GradientsMatchCentralFiniteDifferences) {
  const int obs_dim = 3, hidden = 8, batch = 4;
  Rng data_rng(77);
  for (int draw = 0; draw < 10; ++draw) {
    PolicyParams p = PolicyParams::init(obs_dim, 1000 + draw, hidden);
    MatX obs(obs_dim, batch);
    MatX d_mean(kActionDim, batch);
    VecX d_value(batch);
    for (int j = 0; j < batch; ++j) {
      for (int k = 0; k < obs_dim; ++k) obs(k, j) = data_rng.uniform(-1, 1);
      for (int a = 0; a < kActionDim; ++a)
        d_mean(a, j) = data_rng.uniform(-1, 1);
      d_value(j) = data_rng.uniform(-1, 1);
    }
    // scalar loss = sum_j (d_mean_j . mean_j + d_value_j * value_j)
    const auto loss = [&](PolicyParams& params) {
      ForwardCache cache;
      policy_forward(params, obs, cache);
      double l = 0.0;
      for (int j = 0; j < batch; ++j) {
        l += d_mean.col(j).dot(cache.mean.col(j));
        l += d_value(j) * cache.value(j);
      }
      return l;
    };

    ForwardCache cache;
    policy_forward(p, obs, cache);
    PolicyGrads grads = PolicyGrads::zeros_like(p);
    policy_backward(p, cache, d_mean, d_value, grads);

    auto params = all_params(p);
    auto grad_ptrs = all_grads(grads);
    ASSERT_EQ(params.size(), grad_ptrs.size());
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double orig = *params[i];
      *params[i] = orig + h;
      const double lp = loss(p);
      *params[i] = orig - h;
      const double lm = loss(p);
      *params[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double scale = std::max({1.0, std::abs(fd), std::abs(*grad_ptrs[i])});
      EXPECT_NEAR(*grad_ptrs[i], fd, 1e-4 * scale)
          << "draw " << draw << " param " << i;
    }
  }
}

TEST(Mlp, DeadReluUnitReceivesZeroGradient) {
  PolicyParams p = PolicyParams::init(2, 4, 4);
  p.a1.b(0) = -100.0;  // unit 0 never activates on bounded inputs
  MatX obs(2, 3);
  obs << 0.1, -0.5, 0.9, 0.4, 0.2, -0.3;
  ForwardCache cache;
  policy_forward(p, obs, cache);
  PolicyGrads grads = PolicyGrads::zeros_like(p);
  const MatX d_mean = MatX::Ones(kActionDim, 3);
  const VecX d_value = VecX::Ones(3);
  policy_backward(p, cache, d_mean, d_value, grads);
  EXPECT_EQ(grads.a1.w.row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grads.a1.b(0), 0.0);
}

TEST(Mlp, ZeroUpstreamGivesZeroGrads) {
  PolicyParams p = PolicyParams::init(3, 11);
  MatX obs = MatX::Ones(3, 2);
  ForwardCache cache;
  policy_forward(p, obs, cache);
  PolicyGrads grads = PolicyGrads::zeros_like(p);
  policy_backward(p, cache, MatX::Zero(kActionDim, 2), VecX::Zero(2), grads);
  for (double* g : all_grads(grads)) EXPECT_EQ(*g, 0.0);
}

TEST(Mlp, CheckpointRoundTripsBitExactly) {
  PolicyParams p = PolicyParams::init(34, 42);
  AdamState adam = AdamState::zeros_like(p);
  adam.t = 17;
  adam.m.a1.w.setConstant(0.125);  // exercise non-zero optimizer state
  Checkpoint ck{p, adam, {{"task", "test"}}};
  const std::string path = testing::TempDir() + "/ck.json";
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.params.a1.w, p.a1.w);
  EXPECT_EQ(back.params.a2.w, p.a2.w);
  EXPECT_EQ(back.params.a3.w, p.a3.w);
  EXPECT_EQ(back.params.c1.w, p.c1.w);
  EXPECT_EQ(back.params.c2.w, p.c2.w);
  EXPECT_EQ(back.params.c3.w, p.c3.w);
  EXPECT_EQ(back.params.a1.b, p.a1.b);
  EXPECT_EQ(back.params.c3.b, p.c3.b);
  EXPECT_EQ(back.params.log_std, p.log_std);
  ASSERT_TRUE(back.adam.has_value());
  EXPECT_EQ(back.adam->t, 17);
  EXPECT_EQ(back.adam->m.a1.w, adam.m.a1.w);
  EXPECT_EQ(back.meta.at("task"), "test");
}

TEST(Mlp, OrthogonalInitHasOrthonormalRows) {
  Rng rng(5);
  const MatX w = orthogonal_init(4, 16, 1.0, rng);
  EXPECT_LT((w * w.transpose() - MatX::Identity(4, 4)).norm(), 1e-12);
  const MatX tall = orthogonal_init(16, 4, std::sqrt(2.0), rng);
  EXPECT_LT((tall.transpose() * tall - 2.0 * MatX::Identity(4, 4)).norm(),
            1e-12);
}

TEST(Mlp, AdamZeroGradLeavesParamsUnchanged) {
  PolicyParams p = PolicyParams::init(3, 1);
  const PolicyParams before = p;
  AdamState st = AdamState::zeros_like(p);
  adam_step(p, PolicyGrads::zeros_like(p), st, AdamConfig{});
  EXPECT_EQ(p.a1.w, before.a1.w);
  EXPECT_EQ(p.log_std, before.log_std);
}

TEST(Mlp, LogStdStaysClamped) {
  PolicyParams p = PolicyParams::init(3, 1);
  p.log_std.setConstant(5.0);
  p.clamp_log_std();
  EXPECT_EQ(p.log_std, VecX::Constant(kActionDim, kLogStdMax));
}

}  // namespace
}  // namespace cml
