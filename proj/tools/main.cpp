// Command-line harness: train policies, evaluate controllers across
// scenarios, record rollouts, and benchmark the batched QP solver.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cml/config.hpp"
#include "cml/env.hpp"
#include "cml/grf.hpp"
#include "cml/metrics.hpp"
#include "cml/mlp.hpp"
#include "cml/pd.hpp"
#include "cml/ppo.hpp"
#include "cml/qp.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

fs::path resolve_out_dir(const std::string& out_dir) {
  fs::path p(out_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("CML_OUT_ROOT")) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p;
}

cml::RunConfig load_run_config(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               fs::path* snapshot_dir = nullptr) {
  cml::KeyValueConfig kv = config_path.empty()
                               ? cml::KeyValueConfig::parse_string("")
                               : cml::KeyValueConfig::parse_file(config_path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got: " + ov);
    kv.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  cml::RunConfig rc = resolve_run_config(kv);
  if (snapshot_dir) {
    *snapshot_dir = resolve_out_dir(rc.out_dir);
    std::ofstream snap(*snapshot_dir / "config_snapshot.cfg");
    snap << kv.serialize();
  }
  return rc;
}

cml::Controller make_controller(const cml::RunConfig& rc,
                                const std::string& checkpoint_path) {
  if (rc.controller == "pd") return cml::pd_controller(rc.pd_gains);
  if (checkpoint_path.empty())
    throw std::invalid_argument(
        "controller 'policy' needs --checkpoint (or use controller = pd)");
  const cml::Checkpoint ck = cml::load_checkpoint(checkpoint_path);
  const int expected = cml::observation_dim(rc.task);
  if (ck.params.obs_dim() != expected)
    throw std::invalid_argument(
        "checkpoint expects observation dim " +
        std::to_string(ck.params.obs_dim()) + " but task '" + rc.task_name +
        "' produces " + std::to_string(expected));
  return cml::policy_controller(ck.params);
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides) {
  fs::path out_dir;
  const cml::RunConfig rc = load_run_config(config_path, overrides, &out_dir);
  std::printf("training task=%s robot=%s envs=%d iterations=%d seed=%llu\n",
              rc.task_name.c_str(), rc.robot_name.c_str(), rc.ppo.num_envs,
              rc.ppo.iterations,
              static_cast<unsigned long long>(rc.seed));

  const cml::TrainResult result = cml::train_policy(
      rc.robot, rc.task, rc.ppo, [](const cml::IterationStats& st) {
        std::printf("iter %4d  reward %.4f [%.4f, %.4f]", st.iteration,
                    st.reward_mean, st.reward_min, st.reward_max);
        if (st.eval_reward >= 0.0) std::printf("  eval %.4f", st.eval_reward);
        std::printf("  pi %.4f  v %.4f  kl %.5f  %.2fs\n",
                    st.update.policy_loss, st.update.value_loss,
                    st.update.approx_kl, st.wall_seconds);
        std::fflush(stdout);
      });

  nlohmann::json meta = {{"task", rc.task_name},
                         {"robot", rc.robot_name},
                         {"seed", rc.seed},
                         {"obs_dim", cml::observation_dim(rc.task)}};
  cml::save_checkpoint({result.params, result.adam, meta},
                       (out_dir / "checkpoint_final.json").string());
  cml::save_checkpoint({result.best_params, std::nullopt, meta},
                       (out_dir / "checkpoint_best.json").string());
  cml::write_curve_csv(result.curve, (out_dir / "curve.csv").string());
  std::printf("done: %d iterations, best eval %.4f, artifacts in %s\n",
              result.iterations_run, result.best_eval,
              out_dir.string().c_str());
  if (result.aborted_non_finite) {
    std::fprintf(stderr, "training aborted on non-finite loss\n");
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_eval(const std::string& config_path,
             const std::vector<std::string>& overrides,
             const std::string& checkpoint, std::string scenarios_csv,
             int runs_override, double seconds_override) {
  fs::path out_dir;
  cml::RunConfig rc = load_run_config(config_path, overrides, &out_dir);
  const cml::Controller controller = make_controller(rc, checkpoint);

  std::vector<std::string> scenarios = rc.eval_scenarios;
  if (!scenarios_csv.empty()) {
    scenarios.clear();
    std::istringstream ss(scenarios_csv);
    std::string part;
    while (std::getline(ss, part, ',')) scenarios.push_back(part);
  }
  const int runs = runs_override > 0 ? runs_override : rc.eval_runs;
  const double seconds =
      seconds_override > 0.0 ? seconds_override : rc.eval_seconds;

  for (const auto& name : scenarios) {
    const cml::Scenario sc = cml::scenario_from_name(name);
    const cml::EvalReport report = cml::run_scenario(
        controller, rc.robot, rc.task, sc, runs, seconds, rc.seed);
    const fs::path path = out_dir / ("report_" + name + ".json");
    std::ofstream out(path);
    out << report.to_json().dump(2);
    std::printf(
        "%-18s reward %.4f +- %.4f  survived %d/%d  effort %.1f  "
        "residual %.4f\n",
        name.c_str(),
        report.mean([](const cml::RunStats& r) { return r.normalized_reward; }),
        report.stddev(
            [](const cml::RunStats& r) { return r.normalized_reward; }),
        report.survived_count(), report.runs,
        report.mean([](const cml::RunStats& r) { return r.effort; }),
        report.mean(
            [](const cml::RunStats& r) { return r.mean_qp_residual; }));
  }
  return kExitOk;
}

int cmd_rollout(const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::string& checkpoint, double seconds) {
  fs::path out_dir;
  cml::RunConfig rc = load_run_config(config_path, overrides, &out_dir);
  const cml::Controller controller = make_controller(rc, checkpoint);

  const std::uint64_t seed = cml::splitmix64_seed(rc.seed, 1);
  const cml::RolloutResult r =
      cml::run_rollout(controller, rc.robot, rc.task, seconds, seed);
  r.traj.write_csv((out_dir / "trajectory.csv").string());

  // terrain layout for reproducibility and plotting; the rollout's env
  // derives its terrain seed from the episode seed the same way
  cml::LocomotionEnv probe(rc.robot, rc.task);
  probe.reset(seed);
  std::ofstream tj(out_dir / "terrain.json");
  tj << probe.terrain().to_json().dump(2);

  std::printf("rollout: %zu steps, survived %.2fs, normalized reward %.4f\n",
              r.traj.rows.size(), r.survival_seconds, r.normalized_reward);
  return kExitOk;
}

// Synthetic trot-stance instances (2 stance legs, 6 vars, 10 rows).
std::vector<cml::DenseQp> bench_instances(int count, std::uint64_t seed) {
  using namespace cml;
  std::vector<DenseQp> out;
  out.reserve(count);
  Rng rng(seed);
  const RobotParams params = a1_params();
  QpWeights weights;
  CentroidalState state;
  state.p = Vec3(0, 0, params.p_z_nominal);
  LegVec3 feet;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    feet[leg] = params.r_ref[leg];
    feet[leg].z() = 0.0;
  }
  const StanceMask diag{true, false, false, true};
  for (int i = 0; i < count; ++i) {
    DesiredAccel a_d;
    for (int k = 0; k < 3; ++k) {
      a_d.linear(k) = rng.uniform(-5.0, 5.0);
      a_d.angular(k) = rng.uniform(-5.0, 5.0);
    }
    out.push_back(detail::build_grf_qp(a_d, accel_map(state, feet, params),
                                       diag, weights,
                                       params.mass * params.g));
  }
  return out;
}

bool validate_solutions(const std::vector<cml::DenseQp>& qps,
                        const std::vector<cml::QpSolution>& sols) {
  for (std::size_t i = 0; i < qps.size(); ++i) {
    if (sols[i].status != cml::QpStatus::Optimal) return false;
    if ((qps[i].G * sols[i].x - qps[i].h).maxCoeff() > 1e-8) return false;
    // local optimality gate: feasible coordinate moves never improve
    const double obj = qps[i].objective(sols[i].x);
    for (int k = 0; k < sols[i].x.size(); ++k) {
      for (double d : {1e-4, -1e-4}) {
        cml::VecX xp = sols[i].x;
        xp(k) += d;
        if ((qps[i].G * xp - qps[i].h).maxCoeff() > 0.0) continue;
        if (qps[i].objective(xp) < obj - 1e-9) return false;
      }
    }
  }
  return true;
}

int cmd_bench_qp(const std::string& batch_sizes_csv, int threads,
                 const std::string& out_path) {
  std::vector<int> batch_sizes;
  std::istringstream ss(batch_sizes_csv);
  std::string part;
  while (std::getline(ss, part, ','))
    batch_sizes.push_back(std::stoi(part));

  nlohmann::json j;
  j["threads"] = threads;
  j["instance"] = {{"vars", 6}, {"constraints", 10}, {"stance_legs", 2}};
  auto& results = j["results"];
  results = nlohmann::json::array();
  for (int batch : batch_sizes) {
    const auto qps = bench_instances(batch, 1234);
    auto sols = cml::solve_qp_batch(qps, 1e-8, 30, 1);
    if (!validate_solutions(qps, sols)) {
      std::fprintf(stderr, "bench validation failed at batch %d\n", batch);
      return kExitRuntimeError;
    }
    const int repeats = std::max(1, 2000 / std::max(batch, 1));
    const auto t0 = std::chrono::steady_clock::now();
    for (int rep = 0; rep < repeats; ++rep)
      sols = cml::solve_qp_batch(qps, 1e-8, 30, threads);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count() /
        repeats;
    const double per_second = batch / dt;
    results.push_back({{"batch", batch},
                       {"seconds_per_batch", dt},
                       {"instances_per_second", per_second}});
    std::printf("batch %6d: %.3f ms/batch, %.0f QPs/s\n", batch, dt * 1e3,
                per_second);
  }
  if (!out_path.empty()) {
    fs::path p(out_path);
    if (p.is_relative()) {
      if (const char* root = std::getenv("CML_OUT_ROOT"))
        p = fs::path(root) / p;
    }
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    out << j.dump(2);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"centroidal-model locomotion: training, evaluation, rollouts"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, scenarios_csv;
  std::string batch_sizes = "1,10,100,1000";
  std::string bench_out;
  std::vector<std::string> overrides;
  double seconds = 10.0;
  int runs = 0;
  int threads = 2;

  auto* train = app.add_subcommand("train", "train a policy with PPO");
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--set", overrides, "override config keys (key=value)");

  auto* eval = app.add_subcommand("eval", "run evaluation scenarios");
  eval->add_option("--config", config_path, "key = value config file");
  eval->add_option("--set", overrides, "override config keys (key=value)");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint JSON");
  eval->add_option("--scenarios", scenarios_csv,
                   "comma-separated scenario names");
  eval->add_option("--runs", runs, "runs per scenario (default from config)");
  eval->add_option("--seconds", seconds, "seconds per run")
      ->capture_default_str();

  auto* rollout = app.add_subcommand("rollout", "record one trajectory CSV");
  rollout->add_option("--config", config_path, "key = value config file");
  rollout->add_option("--set", overrides, "override config keys (key=value)");
  rollout->add_option("--checkpoint", checkpoint, "policy checkpoint JSON");
  rollout->add_option("--seconds", seconds, "rollout length")
      ->capture_default_str();

  auto* bench =
      app.add_subcommand("bench-qp", "benchmark the batched QP solver");
  bench->add_option("--batch-sizes", batch_sizes,
                    "comma-separated batch sizes")
      ->capture_default_str();
  bench->add_option("--threads", threads, "worker threads")
      ->capture_default_str();
  bench->add_option("--out", bench_out, "timing JSON output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path, overrides);
    if (app.got_subcommand(eval))
      return cmd_eval(config_path, overrides, checkpoint, scenarios_csv, runs,
                      seconds);
    if (app.got_subcommand(rollout))
      return cmd_rollout(config_path, overrides, checkpoint, seconds);
    if (app.got_subcommand(bench))
      return cmd_bench_qp(batch_sizes, threads, bench_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  }
  return kExitOk;
}
