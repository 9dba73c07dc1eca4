#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "cml/types.hpp"

namespace cml {

/// Per-leg integer phase counters, in ticks. Phases grow without bound;
/// classification applies mod T at the use site so touchdown detection
/// stays exact.
using PhaseVector = std::array<std::int64_t, kNumLegs>;

struct GaitConfig {
  std::int64_t cycle_ticks = 60;       // T
  std::int64_t swing_ticks = 30;       // T_swing
  PhaseVector phi0{0, 30, 30, 0};
  bool frozen = false;                 // phases never advance
  bool strict_swing = false;           // use (phi mod T) < T_swing instead of <=

  bool valid() const {
    if (!(swing_ticks > 0 && swing_ticks < cycle_ticks)) return false;
    for (auto p : phi0)
      if (p < 0 || p >= cycle_ticks) return false;
    return true;
  }
};

inline PhaseVector advance_phases(const PhaseVector& phases, const GaitConfig& cfg) {
  if (cfg.frozen) return phases;
  PhaseVector next = phases;
  for (auto& p : next) ++p;
  return next;
}

inline bool in_swing(std::int64_t phi, const GaitConfig& cfg) {
  const std::int64_t m = phi % cfg.cycle_ticks;
  return cfg.strict_swing ? m < cfg.swing_ticks : m <= cfg.swing_ticks;
}

inline bool at_touchdown_boundary(std::int64_t phi, const GaitConfig& cfg) {
  return !cfg.frozen && phi % cfg.cycle_ticks == 0;
}

inline double normalized_phase(std::int64_t phi, const GaitConfig& cfg) {
  return static_cast<double>(phi % cfg.cycle_ticks) /
         static_cast<double>(cfg.cycle_ticks);
}

inline GaitConfig trot_gait() {
  return GaitConfig{60, 30, {0, 30, 30, 0}, false, false};
}

inline GaitConfig walk_gait() {
  return GaitConfig{120, 30, {0, 90, 60, 30}, false, false};
}

inline GaitConfig fast_trot_gait() {
  return GaitConfig{40, 20, {0, 20, 20, 0}, false, false};
}

/// Frozen diagonal stance: FL and RR hold phase 31 (stance for T=60,
/// T_swing=30), FR and RL hold 0.
inline GaitConfig two_leg_gait() {
  return GaitConfig{60, 30, {31, 0, 0, 31}, true, false};
}

/// Seconds from foothold planning (swing start) to the middle of the
/// following stance; the sagittal Raibert gain that keeps stance feet
/// centered under a steadily moving body.
inline double plan_horizon_seconds(const GaitConfig& cfg, double dt) {
  const double stance = static_cast<double>(cfg.cycle_ticks - cfg.swing_ticks);
  return (static_cast<double>(cfg.swing_ticks) + stance / 2.0) * dt;
}

inline GaitConfig gait_preset(const std::string& name) {
  if (name == "trot") return trot_gait();
  if (name == "walk") return walk_gait();
  if (name == "fast_trot") return fast_trot_gait();
  if (name == "two_leg") return two_leg_gait();
  throw std::invalid_argument("unknown gait preset: " + name);
}

}  // namespace cml
