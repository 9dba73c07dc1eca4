#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cml/env.hpp"
#include "cml/mlp.hpp"
#include "cml/pd.hpp"
#include "cml/types.hpp"

namespace cml {

/// Mean per-step reward over a fixed-length run; steps after an early
/// termination count as zero, so falling scores strictly worse than
/// surviving.
inline double normalized_reward(const std::vector<double>& rewards,
                                int episode_steps) {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum / episode_steps;
}

/// (1/T) sum ||f_t||^2 over the recorded force vectors.
inline double effort(const std::vector<Vec12>& forces) {
  if (forces.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& f : forces) sum += f.squaredNorm();
  return sum / static_cast<double>(forces.size());
}

/// |X_k|^2 for k = 0..N-1 via direct DFT of the mean-removed signal.
inline std::vector<double> dft_power(const std::vector<double>& signal) {
  const std::size_t n = signal.size();
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> power(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * M_PI * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(n);
      const double x = signal[t] - mean;
      re += x * std::cos(angle);
      im += x * std::sin(angle);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

/// Fraction of spectral energy above `cutoff_hz` (DC excluded);
/// constant signals are defined as 0.
inline double esd_high_fraction(const std::vector<double>& signal,
                                double sample_rate_hz = 100.0,
                                double cutoff_hz = 10.0) {
  const std::size_t n = signal.size();
  if (n < 2) return 0.0;
  const std::vector<double> power = dft_power(signal);
  double total = 0.0, high = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    // fold to the physical frequency of the bin
    const std::size_t folded = std::min(k, n - k);
    const double freq =
        static_cast<double>(folded) * sample_rate_hz / static_cast<double>(n);
    total += power[k];
    if (freq > cutoff_hz) high += power[k];
  }
  if (total <= 0.0) return 0.0;
  return high / total;
}

/// Per-step ||achieved - desired|| body-acceleration discrepancy.
inline std::vector<double> qp_residual_series(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.rows.size());
  for (const auto& row : traj.rows)
    out.push_back((row.achieved - row.a_d).norm());
  return out;
}

// ---------------------------------------------------------------------------
// Scenario runners

/// A controller maps the current env (and its observation) to a raw
/// action in [-1, 1]^6.
using Controller = std::function<Vec6(const LocomotionEnv&, const VecX&)>;

inline Controller policy_controller(PolicyParams params) {
  auto shared = std::make_shared<PolicyParams>(std::move(params));
  return [shared](const LocomotionEnv&, const VecX& obs) -> Vec6 {
    return policy_forward(*shared, obs).first;
  };
}

inline Controller pd_controller(PdGains gains) {
  return [gains](const LocomotionEnv& env, const VecX&) -> Vec6 {
    TaskConfig cfg = env.config();
    if (gains.v_ramp_rate > 0.0 && cfg.v_x_desired > 0.0)
      cfg.v_x_desired =
          std::min(gains.v_ramp_rate * env.time(), cfg.v_x_desired);
    return pd_raw_action(env.state(), cfg, gains);
  };
}

struct RolloutResult {
  Trajectory traj;
  std::vector<double> rewards;
  std::vector<Vec12> forces;
  std::vector<double> foot_z;  // front-left foot height series
  std::vector<double> body_z;
  double normalized_reward = 0.0;
  double survival_seconds = 0.0;
  bool survived = false;
  FailReason fail = FailReason::None;
};

/// Deterministic rollout of `seconds` of simulated time (or until the
/// episode fails). `sim_override` perturbs the simulated body while the
/// controller keeps the nominal model.
inline RolloutResult run_rollout(const Controller& controller,
                                 const RobotParams& model,
                                 const TaskConfig& task, double seconds,
                                 std::uint64_t seed,
                                 const RobotParams* sim_override = nullptr) {
  TaskConfig cfg = task;
  cfg.episode_steps = static_cast<int>(std::lround(seconds / cfg.dt));
  cfg.sim_mass_jitter = 0.0;  // evaluation defines its own mismatch
  LocomotionEnv env(model, cfg);
  if (sim_override) env.set_sim_params(*sim_override);
  VecX obs = env.reset(seed);

  RolloutResult out;
  while (!env.done()) {
    const Vec6 raw = controller(env, obs);
    const StepResult r = env.step(raw);
    out.traj.record(env, r);
    out.rewards.push_back(r.reward);
    out.forces.push_back(r.info.forces);
    out.foot_z.push_back(env.footholds()[0].z());
    out.body_z.push_back(env.state().p.z());
    obs = r.obs;
    if (r.done) {
      out.fail = r.info.fail;
      break;
    }
  }
  out.survival_seconds = env.step_count() * cfg.dt;
  out.survived = out.fail == FailReason::None;
  out.normalized_reward = normalized_reward(out.rewards, cfg.episode_steps);
  return out;
}

enum class Scenario {
  Default,
  MassPlus5,
  MassMinus5,
  WaveField,
  StepNoiseHeight,
};

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Default: return "default";
    case Scenario::MassPlus5: return "mass_plus_5kg";
    case Scenario::MassMinus5: return "mass_minus_5kg";
    case Scenario::WaveField: return "wave_field";
    case Scenario::StepNoiseHeight: return "step_noise_height";
  }
  return "default";
}

inline std::vector<std::string> scenario_names() {
  return {"default", "mass_plus_5kg", "mass_minus_5kg", "wave_field",
          "step_noise_height"};
}

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "default") return Scenario::Default;
  if (name == "mass_plus_5kg") return Scenario::MassPlus5;
  if (name == "mass_minus_5kg") return Scenario::MassMinus5;
  if (name == "wave_field") return Scenario::WaveField;
  if (name == "step_noise_height") return Scenario::StepNoiseHeight;
  throw std::invalid_argument("unknown scenario: " + name);
}

struct RunStats {
  double normalized_reward = 0.0;
  double effort = 0.0;
  double survival_seconds = 0.0;
  double mean_qp_residual = 0.0;
  double esd_foot_z = 0.0;
  double esd_body_z = 0.0;
  bool survived = false;
};

struct EvalReport {
  std::string scenario;
  int runs = 0;
  double seconds = 0.0;
  std::vector<RunStats> per_run;

  double mean(const std::function<double(const RunStats&)>& f) const {
    double s = 0.0;
    for (const auto& r : per_run) s += f(r);
    return per_run.empty() ? 0.0 : s / per_run.size();
  }
  double stddev(const std::function<double(const RunStats&)>& f) const {
    if (per_run.size() < 2) return 0.0;
    const double m = mean(f);
    double s = 0.0;
    for (const auto& r : per_run) s += (f(r) - m) * (f(r) - m);
    return std::sqrt(s / per_run.size());
  }
  int survived_count() const {
    int n = 0;
    for (const auto& r : per_run) n += r.survived ? 1 : 0;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario;
    j["runs"] = runs;
    j["seconds"] = seconds;
    auto& arr = j["per_run"];
    arr = nlohmann::json::array();
    for (const auto& r : per_run) {
      arr.push_back({{"normalized_reward", r.normalized_reward},
                     {"effort", r.effort},
                     {"survival_seconds", r.survival_seconds},
                     {"mean_qp_residual", r.mean_qp_residual},
                     {"esd_foot_z", r.esd_foot_z},
                     {"esd_body_z", r.esd_body_z},
                     {"survived", r.survived}});
    }
    auto agg = [&](const char* key, auto getter) {
      j["aggregate"][key] = {{"mean", mean(getter)}, {"std", stddev(getter)}};
    };
    agg("normalized_reward",
        [](const RunStats& r) { return r.normalized_reward; });
    agg("effort", [](const RunStats& r) { return r.effort; });
    agg("survival_seconds",
        [](const RunStats& r) { return r.survival_seconds; });
    agg("mean_qp_residual",
        [](const RunStats& r) { return r.mean_qp_residual; });
    agg("esd_foot_z", [](const RunStats& r) { return r.esd_foot_z; });
    agg("esd_body_z", [](const RunStats& r) { return r.esd_body_z; });
    j["aggregate"]["survived_runs"] = survived_count();
    return j;
  }
};

/// Applies the scenario's model mismatch: mass perturbations scale the
/// simulated body only; height perturbations overlay the task terrain.
inline void apply_scenario(Scenario s, TaskConfig& task, RobotParams& sim) {
  switch (s) {
    case Scenario::Default:
      break;
    case Scenario::MassPlus5:
      sim.mass += 5.0;
      break;
    case Scenario::MassMinus5:
      sim.mass -= 5.0;
      break;
    case Scenario::WaveField: {
      const TerrainFactory base = task.terrain;
      task.terrain = [base](std::uint64_t seed) {
        return base(seed).with_wave_height();
      };
      break;
    }
    case Scenario::StepNoiseHeight: {
      const TerrainFactory base = task.terrain;
      task.terrain = [base](std::uint64_t seed) {
        return base(seed).with_noise_height(splitmix64(seed));
      };
      break;
    }
  }
}

/// 10 runs x 10 s by default, seeds varied per run (initial pose and
/// terrain generation both derive from them).
inline EvalReport run_scenario(const Controller& controller,
                               const RobotParams& model,
                               const TaskConfig& task, Scenario scenario,
                               int runs = 10, double seconds = 10.0,
                               std::uint64_t base_seed = 0) {
  TaskConfig cfg = task;
  RobotParams sim = model;
  apply_scenario(scenario, cfg, sim);

  EvalReport report;
  report.scenario = scenario_name(scenario);
  report.runs = runs;
  report.seconds = seconds;
  for (int run = 0; run < runs; ++run) {
    std::uint64_t s = base_seed ^ (0xa0761d6478bd642fULL * (run + 1));
    const RolloutResult r =
        run_rollout(controller, model, cfg, seconds, splitmix64(s), &sim);
    RunStats stats;
    stats.normalized_reward = r.normalized_reward;
    stats.effort = effort(r.forces);
    stats.survival_seconds = r.survival_seconds;
    const auto residuals = qp_residual_series(r.traj);
    double res_sum = 0.0;
    for (double v : residuals) res_sum += v;
    stats.mean_qp_residual =
        residuals.empty() ? 0.0 : res_sum / residuals.size();
    stats.esd_foot_z = esd_high_fraction(r.foot_z);
    stats.esd_body_z = esd_high_fraction(r.body_z);
    stats.survived = r.survived;
    report.per_run.push_back(stats);
  }
  return report;
}

}  // namespace cml
