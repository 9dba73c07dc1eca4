#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cml/env.hpp"
#include "cml/mlp.hpp"
#include "cml/rng.hpp"
#include "cml/types.hpp"

namespace cml {

inline std::uint64_t splitmix64_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL * (b + 1));
  return splitmix64(s);
}

struct PpoConfig {
  int num_envs = 256;
  int horizon = 64;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double lr = 1e-3;
  int epochs = 4;
  int minibatch_size = 4096;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  int iterations = 500;
  std::uint64_t seed = 0;
  int num_threads = 2;

  // periodic greedy evaluation; also drives best-checkpoint tracking and
  // the optional early stop
  int eval_every = 10;
  int eval_episodes = 5;
  double stop_at_reward = -1.0;  // disabled when negative

  // exploration-noise schedule: an annealed ceiling on log_std, linear
  // from `start` to `end` over `frac` of the run (log_std itself stays
  // trainable underneath). Defaults leave the ceiling inactive.
  double log_std_ceiling_start = -1.0;
  double log_std_ceiling_end = -2.3;
  double log_std_anneal_frac = 0.8;

  bool valid() const {
    return num_envs > 0 && horizon > 0 && gamma > 0.0 && gamma <= 1.0 &&
           gae_lambda >= 0.0 && gae_lambda <= 1.0 && clip_eps > 0.0 &&
           clip_eps < 1.0 && epochs > 0 && minibatch_size > 0 &&
           iterations >= 0;
  }
};

/// Flat transition storage, row = t * num_envs + env.
struct RolloutBuffer {
  int horizon = 0, num_envs = 0, obs_dim = 0;
  MatX obs;        // (T*N) x D
  MatX actions;    // (T*N) x act
  VecX log_probs, rewards, values;
  std::vector<std::uint8_t> dones;
  VecX bootstrap_values;  // N, critic value of the post-rollout observation
  VecX advantages, returns;

  int size() const { return horizon * num_envs; }
  int index(int t, int env) const { return t * num_envs + env; }
};

/// Standard GAE recursion with termination masking; returns = adv + value.
inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  const int t_max = buf.horizon, n = buf.num_envs;
  buf.advantages.resize(buf.size());
  buf.returns.resize(buf.size());
  for (int env = 0; env < n; ++env) {
    double last_gae = 0.0;
    for (int t = t_max - 1; t >= 0; --t) {
      const int k = buf.index(t, env);
      const double nonterminal = buf.dones[k] ? 0.0 : 1.0;
      const double next_value =
          (t == t_max - 1) ? buf.bootstrap_values(env)
                           : buf.values(buf.index(t + 1, env));
      const double delta = buf.rewards(k) +
                           gamma * next_value * nonterminal - buf.values(k);
      last_gae = delta + gamma * lambda * nonterminal * last_gae;
      buf.advantages(k) = last_gae;
      buf.returns(k) = buf.advantages(k) + buf.values(k);
    }
  }
}

/// Rolls the policy for `horizon` steps across the vectorized envs.
/// Sampling noise comes from the trainer rng in (step, env) order, so a
/// collection is reproducible independent of env worker threads.
inline RolloutBuffer collect_rollout(const PolicyParams& policy, VecEnv& envs,
                                     int horizon, Rng& rng) {
  RolloutBuffer buf;
  buf.horizon = horizon;
  buf.num_envs = envs.num_envs();
  buf.obs_dim = envs.obs_dim();
  buf.obs.resize(buf.size(), buf.obs_dim);
  buf.actions.resize(buf.size(), kActionDim);
  buf.log_probs.resize(buf.size());
  buf.rewards.resize(buf.size());
  buf.values.resize(buf.size());
  buf.dones.assign(buf.size(), 0);

  ForwardCache cache;
  MatX action_batch(buf.num_envs, kActionDim);
  for (int t = 0; t < horizon; ++t) {
    const MatX& obs = envs.observations();  // N x D
    policy_forward(policy, obs.transpose(), cache);
    for (int env = 0; env < buf.num_envs; ++env) {
      const int k = buf.index(t, env);
      buf.obs.row(k) = obs.row(env);
      const SampleResult s = sample_action(policy, cache.mean.col(env), rng);
      buf.actions.row(k) = s.action.transpose();
      buf.log_probs(k) = s.log_prob;
      buf.values(k) = cache.value(env);
      action_batch.row(env) = s.action.transpose();
    }
    const VecEnv::BatchResult r = envs.step(action_batch);
    for (int env = 0; env < buf.num_envs; ++env) {
      const int k = buf.index(t, env);
      buf.rewards(k) = r.rewards(env);
      buf.dones[k] = r.dones[env];
    }
  }
  policy_forward(policy, envs.observations().transpose(), cache);
  buf.bootstrap_values = cache.value;
  return buf;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  bool finite = true;
};

namespace detail {

inline double grads_squared_norm(const PolicyGrads& g) {
  auto layer = [](const LayerGrad& l) {
    return l.w.squaredNorm() + l.b.squaredNorm();
  };
  return layer(g.a1) + layer(g.a2) + layer(g.a3) + layer(g.c1) +
         layer(g.c2) + layer(g.c3) + g.log_std.squaredNorm();
}

inline void scale_grads(PolicyGrads& g, double s) {
  auto layer = [s](LayerGrad& l) {
    l.w *= s;
    l.b *= s;
  };
  layer(g.a1);
  layer(g.a2);
  layer(g.a3);
  layer(g.c1);
  layer(g.c2);
  layer(g.c3);
  g.log_std *= s;
}

}  // namespace detail

/// Clipped-surrogate PPO update over the buffer: advantages are
/// normalized once per call, then `epochs` passes of shuffled
/// minibatches with exact analytic gradients.
inline UpdateStats ppo_update(PolicyParams& policy, AdamState& adam,
                              RolloutBuffer& buf, const PpoConfig& cfg,
                              Rng& rng) {
  UpdateStats stats;
  const int total = buf.size();

  const double adv_mean = buf.advantages.mean();
  const double adv_std = std::sqrt(
      (buf.advantages.array() - adv_mean).square().sum() / total);
  buf.advantages =
      (buf.advantages.array() - adv_mean) / (adv_std + 1e-8);

  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  ForwardCache cache;
  int stat_batches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    for (int start = 0; start < total; start += cfg.minibatch_size) {
      const int count = std::min(cfg.minibatch_size, total - start);
      MatX obs_cols(buf.obs_dim, count);
      for (int j = 0; j < count; ++j)
        obs_cols.col(j) = buf.obs.row(order[start + j]).transpose();
      policy_forward(policy, obs_cols, cache);

      MatX d_mean = MatX::Zero(kActionDim, count);
      VecX d_value(count);
      VecX d_log_std = VecX::Zero(kActionDim);
      const double inv_count = 1.0 / count;

      double pi_loss = 0.0, v_loss = 0.0, kl = 0.0;
      int clipped = 0;
      for (int j = 0; j < count; ++j) {
        const int k = order[start + j];
        const VecX action = buf.actions.row(k).transpose();
        const VecX mean = cache.mean.col(j);
        const double lp_new =
            gaussian_log_prob(action, mean, policy.log_std);
        const double log_ratio = lp_new - buf.log_probs(k);
        const double ratio = std::exp(log_ratio);
        const double adv = buf.advantages(k);
        kl += (ratio - 1.0) - log_ratio;

        const double unclipped = ratio * adv;
        const double clipped_ratio =
            std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double clipped_term = clipped_ratio * adv;
        pi_loss += -std::min(unclipped, clipped_term);
        if (clipped_ratio != ratio) ++clipped;

        // gradient flows through the ratio only when the unclipped term
        // is the active minimum
        double d_lp = 0.0;
        if (unclipped <= clipped_term) d_lp = -adv * ratio * inv_count;

        for (int a = 0; a < kActionDim; ++a) {
          const double sigma = std::exp(policy.log_std(a));
          const double z = (action(a) - mean(a)) / sigma;
          d_mean(a, j) = d_lp * z / sigma;
          d_log_std(a) += d_lp * (z * z - 1.0);
        }

        const double v_err = cache.value(j) - buf.returns(k);
        v_loss += 0.5 * v_err * v_err;
        d_value(j) = cfg.value_coef * v_err * inv_count;
      }
      // entropy bonus: state-independent for a diagonal Gaussian
      d_log_std.array() -= cfg.entropy_coef;

      PolicyGrads grads = PolicyGrads::zeros_like(policy);
      grads.log_std = d_log_std;
      policy_backward(policy, cache, d_mean, d_value, grads);

      const double norm = std::sqrt(detail::grads_squared_norm(grads));
      if (!std::isfinite(norm) || !std::isfinite(pi_loss) ||
          !std::isfinite(v_loss)) {
        stats.finite = false;
        return stats;
      }
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
        detail::scale_grads(grads, cfg.max_grad_norm / norm);
      adam_step(policy, grads, adam, adam_cfg);

      stats.policy_loss += pi_loss * inv_count;
      stats.value_loss += v_loss * inv_count;
      stats.entropy += policy_entropy(policy);
      stats.clip_fraction += static_cast<double>(clipped) / count;
      stats.approx_kl += kl * inv_count;
      stats.grad_norm += norm;
      ++stat_batches;
    }
  }
  if (stat_batches > 0) {
    stats.policy_loss /= stat_batches;
    stats.value_loss /= stat_batches;
    stats.entropy /= stat_batches;
    stats.clip_fraction /= stat_batches;
    stats.approx_kl /= stat_batches;
    stats.grad_norm /= stat_batches;
  }
  return stats;
}

/// Mean per-step reward of greedy (mean-action) episodes; terminated
/// episodes count their missing steps as zero reward.
inline double evaluate_policy(const PolicyParams& policy,
                              const RobotParams& robot, const TaskConfig& task,
                              int episodes, std::uint64_t seed) {
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    LocomotionEnv env(robot, task);
    VecX obs = env.reset(splitmix64_seed(seed, ep));
    double ep_reward = 0.0;
    for (int t = 0; t < task.episode_steps && !env.done(); ++t) {
      const auto [mean, value] = policy_forward(policy, obs);
      const StepResult r = env.step(mean);
      ep_reward += r.reward;
      obs = r.obs;
    }
    total += ep_reward / task.episode_steps;
  }
  return total / episodes;
}

struct IterationStats {
  int iteration = 0;
  double reward_mean = 0.0, reward_min = 0.0, reward_max = 0.0;
  double eval_reward = -1.0;  // -1 when not evaluated this iteration
  UpdateStats update;
  double wall_seconds = 0.0;
};

struct TrainResult {
  PolicyParams params;        // final
  PolicyParams best_params;   // best greedy evaluation
  AdamState adam;
  double best_eval = -1.0;
  std::vector<IterationStats> curve;
  bool aborted_non_finite = false;
  int iterations_run = 0;
};

using TrainCallback = std::function<void(const IterationStats&)>;

/// collect -> GAE -> clipped update, repeated; tracks the best greedy
/// checkpoint and optionally stops once a target reward is reached.
inline TrainResult train_policy(const RobotParams& robot,
                                const TaskConfig& task, const PpoConfig& cfg,
                                const TrainCallback& callback = {}) {
  TrainResult result;
  result.params = PolicyParams::init(observation_dim(task), cfg.seed);
  result.best_params = result.params;
  result.adam = AdamState::zeros_like(result.params);

  VecEnv envs(robot, task, cfg.num_envs, cfg.seed, cfg.num_threads, true);
  envs.reset_all();
  Rng rng(splitmix64_seed(cfg.seed, 0x77));

  PolicyParams last_good = result.params;
  AdamState last_good_adam = result.adam;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.log_std_ceiling_start < kLogStdMax ||
        cfg.log_std_ceiling_end < kLogStdMax) {
      const double span =
          std::max(1.0, cfg.log_std_anneal_frac * cfg.iterations);
      const double a = std::min(1.0, iter / span);
      const double ceiling = cfg.log_std_ceiling_start +
                             a * (cfg.log_std_ceiling_end -
                                  cfg.log_std_ceiling_start);
      result.params.log_std = result.params.log_std.cwiseMin(ceiling);
    }
    RolloutBuffer buf = collect_rollout(result.params, envs, cfg.horizon, rng);
    compute_gae(buf, cfg.gamma, cfg.gae_lambda);

    last_good = result.params;
    last_good_adam = result.adam;
    const UpdateStats up = ppo_update(result.params, result.adam, buf, cfg, rng);
    if (!up.finite) {
      result.params = last_good;
      result.adam = last_good_adam;
      result.aborted_non_finite = true;
      break;
    }

    IterationStats st;
    st.iteration = iter;
    st.update = up;
    // per-env mean step reward over the horizon, then spread across envs
    double mn = std::numeric_limits<double>::infinity(), mx = 0.0, sum = 0.0;
    for (int env = 0; env < buf.num_envs; ++env) {
      double env_sum = 0.0;
      for (int t = 0; t < buf.horizon; ++t)
        env_sum += buf.rewards(buf.index(t, env));
      const double env_mean = env_sum / buf.horizon;
      mn = std::min(mn, env_mean);
      mx = std::max(mx, env_mean);
      sum += env_mean;
    }
    st.reward_mean = sum / buf.num_envs;
    st.reward_min = mn;
    st.reward_max = mx;

    const bool last_iter = iter == cfg.iterations - 1;
    if (cfg.eval_every > 0 &&
        ((iter + 1) % cfg.eval_every == 0 || last_iter)) {
      st.eval_reward = evaluate_policy(result.params, robot, task,
                                       cfg.eval_episodes,
                                       splitmix64_seed(cfg.seed, 0xE7A1));
      if (st.eval_reward > result.best_eval) {
        result.best_eval = st.eval_reward;
        result.best_params = result.params;
      }
    }
    st.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.curve.push_back(st);
    result.iterations_run = iter + 1;
    if (callback) callback(st);
    if (cfg.stop_at_reward > 0.0 && st.eval_reward >= cfg.stop_at_reward)
      break;
  }
  if (result.best_eval < 0.0) result.best_params = result.params;
  return result;
}

inline void write_curve_csv(const std::vector<IterationStats>& curve,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve: " + path);
  out << "iteration,reward_mean,reward_min,reward_max,eval_reward,"
         "policy_loss,value_loss,entropy,clip_fraction,approx_kl,"
         "wall_seconds\n";
  for (const auto& st : curve) {
    out << st.iteration << ',' << st.reward_mean << ',' << st.reward_min
        << ',' << st.reward_max << ',' << st.eval_reward << ','
        << st.update.policy_loss << ',' << st.update.value_loss << ','
        << st.update.entropy << ',' << st.update.clip_fraction << ','
        << st.update.approx_kl << ',' << st.wall_seconds << '\n';
  }
}

}  // namespace cml
