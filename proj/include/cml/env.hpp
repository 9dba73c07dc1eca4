#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cml/foot_planner.hpp"
#include "cml/gait.hpp"
#include "cml/grf.hpp"
#include "cml/qp.hpp"
#include "cml/rng.hpp"
#include "cml/robot.hpp"
#include "cml/sim.hpp"
#include "cml/so3.hpp"
#include "cml/terrain.hpp"
#include "cml/types.hpp"

namespace cml {

using TerrainFactory = std::function<Terrain(std::uint64_t seed)>;

inline TerrainFactory fixed_terrain(Terrain t) {
  return [terrain = std::move(t)](std::uint64_t) { return terrain; };
}

struct TaskConfig {
  TerrainFactory terrain = fixed_terrain(Terrain::flat());
  GaitConfig gait = trot_gait();
  double v_x_desired = 0.5;    // m/s
  double p_z_desired = 0.30;   // m; aligned with the robot preset by builders
  double lin_accel_bound = 15.0;   // m/s^2 per linear action component
  double ang_accel_bound = 30.0;   // rad/s^2 per angular action component
  int episode_steps = 1000;        // 10 s at 100 Hz
  double dt = 0.01;
  bool observe_py = false;   // balance beam appendage
  bool observe_pxy = false;  // two-leg balancing appendage

  // initial-state randomization ranges
  double init_pz_range = 0.02;
  double init_vel_range = 0.05;
  double init_tilt_range = 0.05;
  // additional uniform forward-velocity seeding at reset, [0, max];
  // exposes on-speed states from the first rollouts during training
  double init_forward_vel_max = 0.0;
  // per-reset simulated-mass randomization, fraction of nominal; the
  // controller-side model stays nominal, so policies experience model
  // mismatch during training (0 disables)
  double sim_mass_jitter = 0.0;

  // cross-robot transfer: input feature scaling for height and foot blocks
  double obs_height_scale = 1.0;
  double obs_foot_scale = 1.0;

  FootPlannerConfig planner;
  QpWeights qp_weights;

  // termination thresholds
  double tilt_limit = 0.6;        // rad, roll or pitch
  double z_low_frac = 0.4;        // of p_z_desired
  double z_high_frac = 1.6;
};

inline int observation_dim(const TaskConfig& cfg) {
  return 32 + (cfg.observe_py ? 1 : 0) + (cfg.observe_pxy ? 2 : 0);
}

/// r = 0.5 r_p + 0.5 r_o with
///   r_p = exp(-10 (pdot_x - v_d)^2 - 50 pdot_y^2 - 50 (p_z - z_d)^2)
///   r_o = exp(-10 |euler|^2)
inline double locomotion_reward(const CentroidalState& state,
                                const TaskConfig& cfg) {
  const double vx_err = state.pdot.x() - cfg.v_x_desired;
  const double r_p = std::exp(-10.0 * vx_err * vx_err -
                              50.0 * state.pdot.y() * state.pdot.y() -
                              50.0 * (state.p.z() - cfg.p_z_desired) *
                                  (state.p.z() - cfg.p_z_desired));
  const Vec3 euler = euler_zyx(state.R);
  const double r_o = std::exp(-10.0 * euler.squaredNorm());
  return 0.5 * r_p + 0.5 * r_o;
}

enum class FailReason {
  None,
  Tilt,
  Height,
  NoFoothold,
  QpFailure,
  NonFinite,
};

struct StepInfo {
  Vec6 a_d = Vec6::Zero();
  Vec6 achieved = Vec6::Zero();
  double qp_residual = 0.0;  // ||achieved - a_d||
  Vec12 forces = Vec12::Zero();
  GrfStatus grf_status = GrfStatus::Ok;
  FailReason fail = FailReason::None;
  bool time_limit = false;
  bool planned_touchdown = false;
};

struct StepResult {
  VecX obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Clips raw policy output to [-1, 1] and maps it to acceleration bounds.
inline DesiredAccel scale_action(const Vec6& raw, const TaskConfig& cfg) {
  const Vec6 clipped = raw.cwiseMax(-1.0).cwiseMin(1.0);
  DesiredAccel a;
  a.linear = clipped.head<3>() * cfg.lin_accel_bound;
  a.angular = clipped.tail<3>() * cfg.ang_accel_bound;
  return a;
}

/// Single environment over the centroidal model. The controller-side
/// model (`model_params`) and the simulated body (`sim_params`) are
/// distinct so model-mismatch scenarios can perturb one without the
/// other.
class LocomotionEnv {
 public:
  LocomotionEnv(RobotParams model, TaskConfig cfg)
      : model_(model), sim_base_(model), sim_(model), cfg_(std::move(cfg)) {}

  void set_sim_params(const RobotParams& p) { sim_base_ = sim_ = p; }
  const RobotParams& model_params() const { return model_; }
  const RobotParams& sim_params() const { return sim_; }
  const TaskConfig& config() const { return cfg_; }

  VecX reset(std::uint64_t seed) {
    Rng rng(seed);
    terrain_ = cfg_.terrain(rng.next_u64());
    sim_ = sim_base_;
    if (cfg_.sim_mass_jitter > 0.0)
      sim_.mass *= 1.0 + rng.uniform(-cfg_.sim_mass_jitter,
                                     cfg_.sim_mass_jitter);
    state_ = CentroidalState{};
    state_.p = Vec3(0.0, 0.0,
                    terrain_.height_at(0.0, 0.0) + cfg_.p_z_desired +
                        rng.uniform(-cfg_.init_pz_range, cfg_.init_pz_range));
    for (int k = 0; k < 3; ++k)
      state_.pdot(k) = rng.uniform(-cfg_.init_vel_range, cfg_.init_vel_range);
    if (cfg_.init_forward_vel_max > 0.0)
      state_.pdot.x() += rng.uniform(0.0, cfg_.init_forward_vel_max);
    const double roll = rng.uniform(-cfg_.init_tilt_range, cfg_.init_tilt_range);
    const double pitch = rng.uniform(-cfg_.init_tilt_range, cfg_.init_tilt_range);
    state_.R = exp_so3(Vec3(0, pitch, 0)) * exp_so3(Vec3(roll, 0, 0));
    state_.omega.setZero();
    phases_ = cfg_.gait.phi0;
    step_count_ = 0;
    done_ = false;
    fail_ = FailReason::None;

    CentroidalState rest = state_;
    rest.pdot.setZero();
    rest.R = Mat3::Identity();
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const auto plan =
          plan_touchdown(rest, leg, terrain_, cfg_.planner, model_);
      if (!plan) {
        done_ = true;
        fail_ = FailReason::NoFoothold;
        footholds_[leg] = rest.p + model_.r_ref[leg];
      } else {
        footholds_[leg] = plan->position;
      }
    }
    return observation();
  }

  StepResult step(const Vec6& raw_action) {
    StepResult out;
    if (done_) {  // sticky: a finished episode never advances
      out.obs = observation();
      out.done = true;
      out.info.fail = fail_;
      return out;
    }

    const DesiredAccel a_d = scale_action(raw_action, cfg_);
    out.info.a_d = a_d.stacked();

    StanceMask stance{};
    int stance_count = 0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      stance[leg] = !in_swing(phases_[leg], cfg_.gait);
      stance_count += stance[leg] ? 1 : 0;
    }

    GrfSolution grf;
    if (stance_count > 0) {
      grf = transcribe(a_d, state_, footholds_, stance, model_,
                       cfg_.qp_weights);
    } else {
      grf.status = GrfStatus::Ballistic;
      grf.stance = stance;
    }
    out.info.grf_status = grf.status;
    if (grf.status == GrfStatus::Infeasible) {
      grf.forces.setZero();
      fail_ = FailReason::QpFailure;
    }
    out.info.forces = grf.forces;
    out.info.achieved = achieved_accel(grf.forces, state_, footholds_, sim_);
    out.info.qp_residual = (out.info.achieved - out.info.a_d).norm();

    FootState feet;
    feet.p = footholds_;
    for (int leg = 0; leg < kNumLegs; ++leg)
      feet.f[leg] = grf.leg_force(leg);
    const Wrench net = net_wrench(state_, feet, sim_);
    state_ = euler_step(state_, net, sim_, cfg_.dt);

    phases_ = advance_phases(phases_, cfg_.gait);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (!at_touchdown_boundary(phases_[leg], cfg_.gait)) continue;
      const auto plan =
          plan_touchdown(state_, leg, terrain_, cfg_.planner, model_);
      if (!plan) {
        fail_ = FailReason::NoFoothold;
      } else {
        footholds_[leg] = plan->position;
        out.info.planned_touchdown = true;
      }
    }

    ++step_count_;
    out.reward = state_.finite() ? locomotion_reward(state_, cfg_) : 0.0;

    // termination checks on the post-step state
    if (!state_.finite()) {
      fail_ = FailReason::NonFinite;
    } else if (fail_ == FailReason::None) {
      const Vec3 euler = euler_zyx(state_.R);
      if (std::abs(euler(0)) > cfg_.tilt_limit ||
          std::abs(euler(1)) > cfg_.tilt_limit) {
        fail_ = FailReason::Tilt;
      } else if (state_.p.z() < cfg_.z_low_frac * cfg_.p_z_desired ||
                 state_.p.z() > cfg_.z_high_frac * cfg_.p_z_desired) {
        fail_ = FailReason::Height;
      }
    }
    done_ = fail_ != FailReason::None;
    if (!done_ && step_count_ >= cfg_.episode_steps) {
      done_ = true;
      out.info.time_limit = true;
    }
    out.info.fail = fail_;
    out.done = done_;
    out.obs = observation();
    return out;
  }

  /// Layout: p_z (1), pdot (3, world), R row-major (9), omega (3, body),
  /// r_i = foothold - p (12, world), normalized phases (4), then the
  /// task appendages. Body displacement is excluded except through the
  /// appendages.
  VecX observation() const {
    VecX obs(observation_dim(cfg_));
    int k = 0;
    obs(k++) = state_.p.z() * cfg_.obs_height_scale;
    for (int i = 0; i < 3; ++i) obs(k++) = state_.pdot(i);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) obs(k++) = state_.R(r, c);
    for (int i = 0; i < 3; ++i) obs(k++) = state_.omega(i);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const Vec3 rel = footholds_[leg] - state_.p;
      for (int i = 0; i < 3; ++i) obs(k++) = rel(i) * cfg_.obs_foot_scale;
    }
    for (int leg = 0; leg < kNumLegs; ++leg)
      obs(k++) = normalized_phase(phases_[leg], cfg_.gait);
    if (cfg_.observe_py) obs(k++) = state_.p.y();
    if (cfg_.observe_pxy) {
      obs(k++) = state_.p.x();
      obs(k++) = state_.p.y();
    }
    return obs;
  }

  const CentroidalState& state() const { return state_; }
  const LegVec3& footholds() const { return footholds_; }
  const PhaseVector& phases() const { return phases_; }
  const Terrain& terrain() const { return terrain_; }
  bool done() const { return done_; }
  int step_count() const { return step_count_; }
  double time() const { return step_count_ * cfg_.dt; }

 private:
  RobotParams model_;
  RobotParams sim_base_;
  RobotParams sim_;
  TaskConfig cfg_;
  Terrain terrain_ = Terrain::flat();
  CentroidalState state_;
  LegVec3 footholds_{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PhaseVector phases_{0, 0, 0, 0};
  int step_count_ = 0;
  bool done_ = false;
  FailReason fail_ = FailReason::None;
};

/// Fixed-size batch of independent environments stepped together.
/// Per-env episode seeds are derived from (base seed, env index,
/// episode counter), so results are independent of batch composition
/// and worker count.
class VecEnv {
 public:
  VecEnv(const RobotParams& model, const TaskConfig& cfg, int num_envs,
         std::uint64_t seed, int num_threads = 1, bool auto_reset = true)
      : cfg_(cfg),
        num_envs_(num_envs),
        base_seed_(seed),
        num_threads_(std::max(1, num_threads)),
        auto_reset_(auto_reset) {
    envs_.reserve(num_envs);
    episode_.assign(num_envs, 0);
    for (int i = 0; i < num_envs; ++i) envs_.emplace_back(model, cfg);
    obs_.resize(num_envs, observation_dim(cfg));
  }

  int num_envs() const { return num_envs_; }
  int obs_dim() const { return static_cast<int>(obs_.cols()); }
  const MatX& observations() const { return obs_; }
  LocomotionEnv& env(int i) { return envs_[i]; }

  void reset_all() {
    parallel_for([&](int i) {
      episode_[i] = 0;
      obs_.row(i) = envs_[i].reset(episode_seed(i, 0)).transpose();
    });
  }

  struct BatchResult {
    VecX rewards;
    std::vector<std::uint8_t> dones;       // episode ended on this step
    std::vector<std::uint8_t> time_limits; // ended by the step cap
    VecX qp_residuals;
  };

  /// actions: num_envs x 6. Done envs auto-reset (when enabled); the
  /// returned observation row is then the next episode's first one.
  BatchResult step(const MatX& actions) {
    BatchResult res;
    res.rewards.resize(num_envs_);
    res.dones.assign(num_envs_, 0);
    res.time_limits.assign(num_envs_, 0);
    res.qp_residuals.resize(num_envs_);
    parallel_for([&](int i) {
      const Vec6 a = actions.row(i).transpose();
      StepResult r = envs_[i].step(a);
      res.rewards(i) = r.reward;
      res.dones[i] = r.done ? 1 : 0;
      res.time_limits[i] = r.info.time_limit ? 1 : 0;
      res.qp_residuals(i) = r.info.qp_residual;
      if (r.done && auto_reset_) {
        ++episode_[i];
        obs_.row(i) =
            envs_[i].reset(episode_seed(i, episode_[i])).transpose();
      } else {
        obs_.row(i) = r.obs.transpose();
      }
    });
    return res;
  }

 private:
  std::uint64_t episode_seed(int env_index, std::int64_t episode) const {
    std::uint64_t s = base_seed_;
    s ^= 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(env_index) + 1);
    s ^= 0xc2b2ae3d27d4eb4fULL * (static_cast<std::uint64_t>(episode) + 1);
    return splitmix64(s);
  }

  template <typename F>
  void parallel_for(F&& body) {
    if (num_threads_ <= 1 || num_envs_ < 2) {
      for (int i = 0; i < num_envs_; ++i) body(i);
      return;
    }
    const int workers = std::min(num_threads_, num_envs_);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (int i = w; i < num_envs_; i += workers) body(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  TaskConfig cfg_;
  int num_envs_;
  std::uint64_t base_seed_;
  int num_threads_;
  bool auto_reset_;
  std::vector<LocomotionEnv> envs_;
  std::vector<std::int64_t> episode_;
  MatX obs_;
};

/// One recorded simulation step; column layout documented in to_csv.
struct TrajectoryRow {
  double t = 0.0;
  Vec3 p = Vec3::Zero(), pdot = Vec3::Zero(), euler = Vec3::Zero(),
       omega = Vec3::Zero();
  Vec12 footholds = Vec12::Zero(), forces = Vec12::Zero();
  Vec6 a_d = Vec6::Zero(), achieved = Vec6::Zero();
  double reward = 0.0;
  int done = 0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory: " + path);
    out << "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,wx,wy,wz";
    for (int leg = 1; leg <= 4; ++leg)
      out << ",foot" << leg << "x,foot" << leg << "y,foot" << leg << "z";
    for (int leg = 1; leg <= 4; ++leg)
      out << ",f" << leg << "x,f" << leg << "y,f" << leg << "z";
    out << ",ad_lx,ad_ly,ad_lz,ad_ax,ad_ay,ad_az";
    out << ",ach_lx,ach_ly,ach_lz,ach_ax,ach_ay,ach_az";
    out << ",reward,done\n";
    out.precision(17);
    for (const auto& r : rows) {
      out << r.t;
      for (int i = 0; i < 3; ++i) out << ',' << r.p(i);
      for (int i = 0; i < 3; ++i) out << ',' << r.pdot(i);
      for (int i = 0; i < 3; ++i) out << ',' << r.euler(i);
      for (int i = 0; i < 3; ++i) out << ',' << r.omega(i);
      for (int i = 0; i < 12; ++i) out << ',' << r.footholds(i);
      for (int i = 0; i < 12; ++i) out << ',' << r.forces(i);
      for (int i = 0; i < 6; ++i) out << ',' << r.a_d(i);
      for (int i = 0; i < 6; ++i) out << ',' << r.achieved(i);
      out << ',' << r.reward << ',' << r.done << '\n';
    }
  }

  void record(const LocomotionEnv& env, const StepResult& step) {
    TrajectoryRow row;
    row.t = env.time();
    row.p = env.state().p;
    row.pdot = env.state().pdot;
    row.euler = euler_zyx(env.state().R);
    row.omega = env.state().omega;
    for (int leg = 0; leg < kNumLegs; ++leg)
      row.footholds.segment<3>(3 * leg) = env.footholds()[leg];
    row.forces = step.info.forces;
    row.a_d = step.info.a_d;
    row.achieved = step.info.achieved;
    row.reward = step.reward;
    row.done = step.done ? 1 : 0;
    rows.push_back(row);
  }
};

}  // namespace cml
