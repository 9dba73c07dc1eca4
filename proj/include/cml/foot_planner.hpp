#pragma once

#include <cmath>
#include <optional>

#include "cml/robot.hpp"
#include "cml/sim.hpp"
#include "cml/so3.hpp"
#include "cml/terrain.hpp"
#include "cml/types.hpp"

namespace cml {

struct FootPlannerConfig {
  // Velocity feedback gain per axis, in seconds. Targets are planned at
  // swing start and held, so the sagittal gain must cover the full
  // plan-ahead horizon (T_swing + T_stance/2, ~0.45 s for the trot
  // presets) or stance feet trail the body and push it forward. The
  // lateral gain stays small: large values make successive lateral
  // placements oscillate.
  Vec2 k_foot = Vec2(0.45, 0.05);
  double grid_resolution = 0.02;  // m
};

/// Touchdown target in the body (yaw) frame: default offset plus a
/// velocity-proportional shift, decoupled per axis.
inline Vec2 raibert_offset(const Vec2& r_ref_xy, const Vec2& pdot_xy,
                           const FootPlannerConfig& cfg) {
  return r_ref_xy + cfg.k_foot.cwiseProduct(pdot_xy);
}

/// Projects `p_foot` onto the ball of radius l_max around the COM. A
/// degenerate zero-length direction falls back to straight down.
inline Vec3 clamp_leg_length(const Vec3& p_foot, const Vec3& p_com,
                             double l_max) {
  const Vec3 d = p_foot - p_com;
  const double len = d.norm();
  if (len < 1e-12) return p_com + l_max * Vec3(0.0, 0.0, -1.0);
  if (len <= l_max) return p_foot;
  return p_com + (l_max / len) * d;
}

struct PlannedFoothold {
  Vec3 position = Vec3::Zero();
  bool length_clamped = false;    // leg-length limit moved the target
  bool feasibility_kept = true;   // final point still passes feasible()
};

/// Raibert target -> yaw-frame-to-world transform -> feasibility snap
/// (only when the exact target is infeasible, via the local sample
/// grid) -> terrain height -> leg-length clamp. If clamping pushes the
/// point off feasible ground we re-snap once and re-clamp; when both
/// constraints cannot hold, leg length wins.
inline std::optional<PlannedFoothold> plan_touchdown(
    const CentroidalState& state, int leg, const Terrain& terrain,
    const FootPlannerConfig& cfg, const RobotParams& params) {
  const double yaw = yaw_of(state.R);
  const Mat3 yaw_rot = rot_z(yaw);
  const Vec2 pdot_body =
      (yaw_rot.transpose() * state.pdot).head<2>();
  const Vec2 offset =
      raibert_offset(params.r_ref[leg].head<2>(), pdot_body, cfg);
  const Vec2 target =
      state.p.head<2>() + (yaw_rot * Vec3(offset.x(), offset.y(), 0.0)).head<2>();

  std::optional<FeasibilityGrid> grid;
  const auto snap = [&](const Vec2& point) -> std::optional<Vec2> {
    if (terrain.feasible(point.x(), point.y())) return point;
    if (!grid)
      grid = local_grid(terrain, state.p.head<2>(), cfg.grid_resolution);
    return snap_to_feasible(*grid, point);
  };

  const auto snapped = snap(target);
  if (!snapped) return std::nullopt;

  PlannedFoothold out;
  const Vec3 candidate(snapped->x(), snapped->y(),
                       terrain.height_at(snapped->x(), snapped->y()));
  Vec3 clamped = clamp_leg_length(candidate, state.p, params.l_max);
  if ((clamped - candidate).norm() < 1e-12) {
    out.position = candidate;
    return out;
  }
  out.length_clamped = true;
  if (terrain.feasible(clamped.x(), clamped.y())) {
    out.position = clamped;
    return out;
  }
  // re-snap once, restricted to cells the leg can actually reach
  if (!grid)
    grid = local_grid(terrain, state.p.head<2>(), cfg.grid_resolution);
  const auto reachable = snap_to_feasible_if(
      *grid, target, [&](const Vec2& pt, double height) {
        return (Vec3(pt.x(), pt.y(), height) - state.p).norm() <=
               params.l_max;
      });
  if (reachable) {
    out.position = Vec3(reachable->x(), reachable->y(),
                        terrain.height_at(reachable->x(), reachable->y()));
    return out;
  }
  out.position = clamped;
  out.feasibility_kept = false;
  return out;
}

}  // namespace cml
