#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cml/env.hpp"
#include "cml/gait.hpp"
#include "cml/pd.hpp"
#include "cml/ppo.hpp"
#include "cml/robot.hpp"
#include "cml/terrain.hpp"

namespace cml {

/// Flat `key = value` configuration with dotted section names and `#`
/// comments. Unknown keys are rejected after resolution so typos fail
/// loudly instead of silently using defaults.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    auto it = values_.find(key);
    accessed_.insert(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    accessed_.insert(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw std::invalid_argument("config key '" + key +
                                  "': expected number, got '" + it->second +
                                  "'");
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    return static_cast<std::int64_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    accessed_.insert(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected bool");
  }

  std::vector<double> get_doubles(const std::string& key,
                                  std::vector<double> fallback) const {
    auto it = values_.find(key);
    accessed_.insert(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ','))
      out.push_back(std::stod(trim(part)));
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  /// Throws if the file contained keys nothing consumed.
  void reject_unknown_keys() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values_)
      if (!accessed_.count(k)) unknown.push_back(k);
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw std::invalid_argument(msg);
    }
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

// ---------------------------------------------------------------------------
// Task presets

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "flat_trot",      "flat_walk",      "fast_trot", "stepping_stones",
      "balance_beam",   "two_leg_balance", "gap_proxy"};
  return names;
}

struct ResolvedTask {
  std::string robot_name;
  RobotParams robot;
  TaskConfig task;
};

/// Fully resolved task preset: terrain, gait, speed, observation
/// appendages, and the robot it defaults to. The sagittal foothold gain
/// follows the gait's plan-ahead horizon; the lateral gain is the
/// per-robot tuned value.
inline ResolvedTask task_preset(const std::string& task_name,
                                const std::string& robot_override = "") {
  ResolvedTask out;
  auto pick_robot = [&](const std::string& default_robot) {
    out.robot_name = robot_override.empty() ? default_robot : robot_override;
    out.robot = robot_preset(out.robot_name);
    out.task.p_z_desired = out.robot.p_z_nominal;
  };
  auto tune_planner = [&]() {
    out.task.planner.k_foot =
        Vec2(plan_horizon_seconds(out.task.gait, out.task.dt),
             out.robot_name == "laikago" ? 0.12 : 0.05);
  };

  if (task_name == "flat_trot") {
    pick_robot("a1");
    out.task.gait = trot_gait();
    out.task.v_x_desired = 0.5;
  } else if (task_name == "flat_walk") {
    pick_robot("a1");
    out.task.gait = walk_gait();
    out.task.v_x_desired = 0.2;
  } else if (task_name == "fast_trot") {
    pick_robot("a1");
    out.task.gait = fast_trot_gait();
    out.task.v_x_desired = 0.3;
    // narrow stance: foot references at half the default distance
    out.robot.r_ref = default_footholds(0.1, 0.05, -out.robot.p_z_nominal);
  } else if (task_name == "stepping_stones") {
    pick_robot("laikago");
    out.task.gait = trot_gait();
    out.task.v_x_desired = 0.25;
    const bool a1 = out.robot_name == "a1";
    out.task.terrain = [a1](std::uint64_t seed) {
      return a1 ? stepping_stones_a1(seed) : stepping_stones_laikago(seed);
    };
  } else if (task_name == "balance_beam") {
    pick_robot("a1");
    out.task.gait = trot_gait();
    out.task.v_x_desired = 0.1;
    out.task.observe_py = true;
    out.task.terrain = fixed_terrain(Terrain::balance_beam(0.05));
  } else if (task_name == "two_leg_balance") {
    pick_robot("a1");
    out.task.gait = two_leg_gait();
    out.task.v_x_desired = 0.0;
    out.task.observe_pxy = true;
  } else if (task_name == "gap_proxy") {
    pick_robot("a1");
    out.task.gait = trot_gait();
    out.task.v_x_desired = 0.3;
    out.task.terrain = fixed_terrain(Terrain::gap(0.12, 1.0));
  } else {
    std::string msg = "unknown task '" + task_name + "'; valid tasks:";
    for (const auto& t : task_names()) msg += " " + t;
    throw std::invalid_argument(msg);
  }
  tune_planner();
  return out;
}

// ---------------------------------------------------------------------------
// Full run configuration

struct RunConfig {
  std::string task_name = "flat_trot";
  std::string robot_name;
  std::string controller = "policy";  // policy | pd
  std::uint64_t seed = 0;
  std::string out_dir;
  RobotParams robot;
  TaskConfig task;
  PpoConfig ppo;
  PdGains pd_gains;
  int eval_runs = 10;
  double eval_seconds = 10.0;
  std::vector<std::string> eval_scenarios = {"default"};
};

inline RunConfig resolve_run_config(const KeyValueConfig& kv) {
  RunConfig rc;
  rc.task_name = kv.get_string("task", "flat_trot");
  const std::string robot_override = kv.get_string("robot", "");
  ResolvedTask preset = task_preset(rc.task_name, robot_override);
  rc.robot_name = preset.robot_name;
  rc.robot = preset.robot;
  rc.task = preset.task;

  rc.controller = kv.get_string("controller", "policy");
  if (rc.controller != "policy" && rc.controller != "pd")
    throw std::invalid_argument("controller must be 'policy' or 'pd'");
  rc.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  rc.out_dir = kv.get_string("out_dir", "runs/" + rc.task_name);

  // robot overrides
  rc.robot.mass = kv.get_double("robot.mass", rc.robot.mass);
  rc.robot.l_max = kv.get_double("robot.l_max", rc.robot.l_max);
  rc.robot.p_z_nominal =
      kv.get_double("robot.p_z_nominal", rc.robot.p_z_nominal);
  {
    const Vec3 d = rc.robot.inertia.diagonal();
    const auto inertia =
        kv.get_doubles("robot.inertia_diag", {d(0), d(1), d(2)});
    if (inertia.size() != 3)
      throw std::invalid_argument("robot.inertia_diag needs 3 values");
    rc.robot.inertia = Vec3(inertia[0], inertia[1], inertia[2]).asDiagonal();
  }
  if (kv.has("robot.r_ref_x") || kv.has("robot.r_ref_y")) {
    const double rx = kv.get_double("robot.r_ref_x", 0.18);
    const double ry = kv.get_double("robot.r_ref_y", 0.13);
    rc.robot.r_ref = default_footholds(rx, ry, -rc.robot.p_z_nominal);
  }
  if (!rc.robot.valid())
    throw std::invalid_argument("robot parameters failed validation");

  // task overrides
  rc.task.p_z_desired = rc.robot.p_z_nominal;
  const std::string gait = kv.get_string("task.gait", "");
  if (!gait.empty()) rc.task.gait = gait_preset(gait);
  rc.task.gait.strict_swing =
      kv.get_bool("task.strict_swing", rc.task.gait.strict_swing);
  rc.task.v_x_desired = kv.get_double("task.v_x_desired", rc.task.v_x_desired);
  rc.task.p_z_desired = kv.get_double("task.p_z_desired", rc.task.p_z_desired);
  rc.task.episode_steps = static_cast<int>(
      kv.get_int("task.episode_steps", rc.task.episode_steps));
  rc.task.lin_accel_bound =
      kv.get_double("task.lin_accel_bound", rc.task.lin_accel_bound);
  rc.task.ang_accel_bound =
      kv.get_double("task.ang_accel_bound", rc.task.ang_accel_bound);
  rc.task.observe_py = kv.get_bool("task.observe_py", rc.task.observe_py);
  rc.task.observe_pxy = kv.get_bool("task.observe_pxy", rc.task.observe_pxy);
  rc.task.obs_height_scale =
      kv.get_double("task.obs_height_scale", rc.task.obs_height_scale);
  rc.task.obs_foot_scale =
      kv.get_double("task.obs_foot_scale", rc.task.obs_foot_scale);
  rc.task.init_pz_range =
      kv.get_double("task.init_pz_range", rc.task.init_pz_range);
  rc.task.init_vel_range =
      kv.get_double("task.init_vel_range", rc.task.init_vel_range);
  rc.task.init_tilt_range =
      kv.get_double("task.init_tilt_range", rc.task.init_tilt_range);
  rc.task.init_forward_vel_max = kv.get_double("task.init_forward_vel_max",
                                               rc.task.init_forward_vel_max);
  rc.task.sim_mass_jitter =
      kv.get_double("task.sim_mass_jitter", rc.task.sim_mass_jitter);

  // terrain override
  const std::string terrain = kv.get_string("terrain.kind", "");
  if (!terrain.empty()) {
    if (terrain == "flat") {
      rc.task.terrain = fixed_terrain(Terrain::flat());
    } else if (terrain == "stepping_stones") {
      SteppingStoneParams p;
      p.spacing_min = kv.get_double("terrain.spacing_min", 0.10);
      p.spacing_max = kv.get_double("terrain.spacing_max", 0.20);
      p.stone_size = kv.get_double("terrain.stone_size", 0.10);
      p.edge_margin = kv.get_double("terrain.edge_margin", 0.02);
      rc.task.terrain = [p](std::uint64_t seed) {
        SteppingStoneParams q = p;
        q.seed = seed;
        return Terrain::stepping_stones(q);
      };
    } else if (terrain == "balance_beam") {
      rc.task.terrain = fixed_terrain(Terrain::balance_beam(
          kv.get_double("terrain.beam_half_width", 0.05)));
    } else if (terrain == "gap") {
      rc.task.terrain = fixed_terrain(
          Terrain::gap(kv.get_double("terrain.gap_width", 0.12),
                       kv.get_double("terrain.gap_x", 1.0)));
    } else if (terrain == "wave_field") {
      rc.task.terrain = fixed_terrain(Terrain::wave_field(
          kv.get_double("terrain.wave_period", 2.5),
          kv.get_double("terrain.wave_peak_to_valley", 0.7)));
    } else if (terrain == "filtered_noise") {
      const double amplitude = kv.get_double("terrain.noise_amplitude", 0.24);
      rc.task.terrain = [amplitude](std::uint64_t seed) {
        return Terrain::filtered_noise(seed, amplitude);
      };
    } else {
      throw std::invalid_argument("unknown terrain.kind: " + terrain);
    }
  }

  // planner and QP weights
  rc.task.planner.k_foot =
      Vec2(kv.get_double("planner.k_foot_x", rc.task.planner.k_foot.x()),
           kv.get_double("planner.k_foot_y", rc.task.planner.k_foot.y()));
  rc.task.planner.grid_resolution = kv.get_double(
      "planner.grid_resolution", rc.task.planner.grid_resolution);
  rc.task.qp_weights.mu = kv.get_double("qp.mu", rc.task.qp_weights.mu);
  rc.task.qp_weights.lambda_reg =
      kv.get_double("qp.lambda", rc.task.qp_weights.lambda_reg);
  rc.task.qp_weights.f_z_min =
      kv.get_double("qp.f_z_min", rc.task.qp_weights.f_z_min);
  {
    const Vec6 q = rc.task.qp_weights.q_diag;
    const auto vals = kv.get_doubles(
        "qp.q_diag", {q(0), q(1), q(2), q(3), q(4), q(5)});
    if (vals.size() != 6)
      throw std::invalid_argument("qp.q_diag needs 6 values");
    for (int i = 0; i < 6; ++i) rc.task.qp_weights.q_diag(i) = vals[i];
  }

  // PPO
  rc.ppo.seed = rc.seed;
  rc.ppo.num_envs =
      static_cast<int>(kv.get_int("ppo.num_envs", rc.ppo.num_envs));
  rc.ppo.horizon = static_cast<int>(kv.get_int("ppo.horizon", rc.ppo.horizon));
  rc.ppo.gamma = kv.get_double("ppo.gamma", rc.ppo.gamma);
  rc.ppo.gae_lambda = kv.get_double("ppo.gae_lambda", rc.ppo.gae_lambda);
  rc.ppo.clip_eps = kv.get_double("ppo.clip", rc.ppo.clip_eps);
  rc.ppo.lr = kv.get_double("ppo.lr", rc.ppo.lr);
  rc.ppo.epochs = static_cast<int>(kv.get_int("ppo.epochs", rc.ppo.epochs));
  rc.ppo.minibatch_size = static_cast<int>(
      kv.get_int("ppo.minibatch_size", rc.ppo.minibatch_size));
  rc.ppo.value_coef = kv.get_double("ppo.value_coef", rc.ppo.value_coef);
  rc.ppo.entropy_coef = kv.get_double("ppo.entropy_coef", rc.ppo.entropy_coef);
  rc.ppo.max_grad_norm =
      kv.get_double("ppo.max_grad_norm", rc.ppo.max_grad_norm);
  rc.ppo.iterations =
      static_cast<int>(kv.get_int("ppo.iterations", rc.ppo.iterations));
  rc.ppo.num_threads =
      static_cast<int>(kv.get_int("ppo.threads", rc.ppo.num_threads));
  rc.ppo.eval_every =
      static_cast<int>(kv.get_int("ppo.eval_every", rc.ppo.eval_every));
  rc.ppo.eval_episodes =
      static_cast<int>(kv.get_int("ppo.eval_episodes", rc.ppo.eval_episodes));
  rc.ppo.stop_at_reward =
      kv.get_double("ppo.stop_at_reward", rc.ppo.stop_at_reward);
  rc.ppo.log_std_ceiling_start = kv.get_double("ppo.log_std_ceiling_start",
                                               rc.ppo.log_std_ceiling_start);
  rc.ppo.log_std_ceiling_end = kv.get_double("ppo.log_std_ceiling_end",
                                             rc.ppo.log_std_ceiling_end);
  rc.ppo.log_std_anneal_frac =
      kv.get_double("ppo.log_std_anneal_frac", rc.ppo.log_std_anneal_frac);
  if (!rc.ppo.valid()) throw std::invalid_argument("invalid ppo settings");

  // PD gains
  rc.pd_gains = pd_gains_preset(rc.robot_name);
  {
    const Vec6 kp = rc.pd_gains.kp, kd = rc.pd_gains.kd;
    const auto kps = kv.get_doubles(
        "pd.kp", {kp(0), kp(1), kp(2), kp(3), kp(4), kp(5)});
    const auto kds = kv.get_doubles(
        "pd.kd", {kd(0), kd(1), kd(2), kd(3), kd(4), kd(5)});
    if (kps.size() != 6 || kds.size() != 6)
      throw std::invalid_argument("pd.kp / pd.kd need 6 values");
    for (int i = 0; i < 6; ++i) {
      rc.pd_gains.kp(i) = kps[i];
      rc.pd_gains.kd(i) = kds[i];
    }
    rc.pd_gains.v_ramp_rate =
        kv.get_double("pd.v_ramp_rate", rc.pd_gains.v_ramp_rate);
  }

  // evaluation
  rc.eval_runs = static_cast<int>(kv.get_int("eval.runs", rc.eval_runs));
  rc.eval_seconds = kv.get_double("eval.seconds", rc.eval_seconds);
  {
    std::istringstream ss(kv.get_string("eval.scenarios", "default"));
    rc.eval_scenarios.clear();
    std::string part;
    while (std::getline(ss, part, ',')) {
      const auto b = part.find_first_not_of(" \t");
      const auto e = part.find_last_not_of(" \t");
      if (b != std::string::npos)
        rc.eval_scenarios.push_back(part.substr(b, e - b + 1));
    }
  }

  kv.reject_unknown_keys();
  return rc;
}

}  // namespace cml
