#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cml/rng.hpp"
#include "cml/types.hpp"

namespace cml {

/// 1-D height profile: white noise through a cascaded first-order
/// low-pass (second order overall), mean-removed, amplitude-normalized,
/// then slope-capped so the composed x+y field never exceeds the target
/// grade. Linear interpolation between samples, clamped at the ends.
struct NoiseProfile {
  double x0 = 0.0;
  double dx = 0.05;
  std::vector<double> samples;

  double at(double x) const {
    if (samples.empty()) return 0.0;
    const double t = (x - x0) / dx;
    if (t <= 0.0) return samples.front();
    const double tmax = static_cast<double>(samples.size() - 1);
    if (t >= tmax) return samples.back();
    const auto i = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(i);
    return samples[i] * (1.0 - frac) + samples[i + 1] * frac;
  }
};

inline NoiseProfile make_noise_profile(std::uint64_t seed, double amplitude,
                                       double alpha, double slope_cap,
                                       double dx, double half_extent) {
  NoiseProfile prof;
  prof.dx = dx;
  prof.x0 = -half_extent;
  const auto n = static_cast<std::size_t>(2.0 * half_extent / dx) + 1;
  prof.samples.resize(n);
  Rng rng(seed);
  double s1 = 0.0, s2 = 0.0;
  for (auto& v : prof.samples) {
    const double w = rng.uniform(-1.0, 1.0);
    s1 += alpha * (w - s1);
    s2 += alpha * (s1 - s2);
    v = s2;
  }
  const double mean =
      std::accumulate(prof.samples.begin(), prof.samples.end(), 0.0) /
      static_cast<double>(n);
  double max_abs = 0.0, max_delta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prof.samples[i] -= mean;
    max_abs = std::max(max_abs, std::abs(prof.samples[i]));
    if (i > 0)
      max_delta = std::max(max_delta,
                           std::abs(prof.samples[i] - prof.samples[i - 1]));
  }
  if (max_abs <= 0.0) return prof;
  double scale = amplitude / max_abs;
  const double slope = max_delta / dx * scale;
  if (slope > slope_cap) scale *= slope_cap / slope;
  for (auto& v : prof.samples) v *= scale;
  return prof;
}

struct SteppingStoneParams {
  double spacing_min = 0.10;  // edge-to-edge gap, m
  double spacing_max = 0.20;
  double stone_size = 0.10;   // square side, m
  double edge_margin = 0.02;  // shrink applied for feasibility, m
  std::uint64_t seed = 0;
  double x_min = -2.0, x_max = 12.0;
  double y_min = -3.0, y_max = 3.0;
  double platform_end = 0.35;  // everything with x below this is feasible
};

/// Terrain = an independent feasibility model (where feet may be placed)
/// and a height model. They compose: e.g. stepping-stone feasibility can
/// carry filtered-noise heights for the perturbation scenarios.
class Terrain {
 public:
  enum class Feasibility { Flat, SteppingStones, BalanceBeam, Gap };
  enum class Height { Zero, Wave, FilteredNoise };

  static Terrain flat() { return Terrain{}; }

  static Terrain stepping_stones(const SteppingStoneParams& p) {
    if (!(p.spacing_min > 0.0) || p.spacing_min > p.spacing_max)
      throw std::invalid_argument("bad stepping stone spacing range");
    Terrain t;
    t.feas_ = Feasibility::SteppingStones;
    t.stones_ = p;
    Rng rng(p.seed);
    t.stone_x_ = tile_axis(p.x_min, p.x_max, p, rng);
    t.stone_y_ = tile_axis(p.y_min, p.y_max, p, rng);
    return t;
  }

  static Terrain balance_beam(double half_width = 0.05) {
    Terrain t;
    t.feas_ = Feasibility::BalanceBeam;
    t.beam_half_width_ = half_width;
    return t;
  }

  static Terrain gap(double width = 0.12, double x_position = 1.0) {
    Terrain t;
    t.feas_ = Feasibility::Gap;
    t.gap_x_ = x_position;
    t.gap_width_ = width;
    return t;
  }

  static Terrain wave_field(double period = 2.5, double peak_to_valley = 0.7) {
    return flat().with_wave_height(period, peak_to_valley);
  }

  static Terrain filtered_noise(std::uint64_t seed, double amplitude = 0.24,
                                double max_slope_deg = 20.0) {
    return flat().with_noise_height(seed, amplitude, max_slope_deg);
  }

  Terrain with_wave_height(double period = 2.5,
                           double peak_to_valley = 0.7) const {
    Terrain t = *this;
    t.height_ = Height::Wave;
    t.wave_period_ = period;
    t.wave_amplitude_ = peak_to_valley / 4.0;  // h = a(sin kx + sin ky)
    return t;
  }

  Terrain with_noise_height(std::uint64_t seed, double amplitude = 0.24,
                            double max_slope_deg = 20.0) const {
    Terrain t = *this;
    t.height_ = Height::FilteredNoise;
    t.noise_seed_ = seed;
    t.noise_amplitude_ = amplitude;
    t.noise_max_slope_deg_ = max_slope_deg;
    // per-axis cap tan(max_slope)/sqrt(2) keeps the composed diagonal
    // gradient within the bound
    const double cap = std::tan(max_slope_deg * M_PI / 180.0) / std::sqrt(2.0);
    t.noise_x_ = make_noise_profile(seed, amplitude / 2.0, 0.15, cap, 0.05,
                                    kNoiseHalfExtent);
    t.noise_y_ = make_noise_profile(seed + 0x9e37, amplitude / 2.0, 0.15, cap,
                                    0.05, kNoiseHalfExtent);
    return t;
  }

  double height_at(double x, double y) const {
    switch (height_) {
      case Height::Zero:
        return 0.0;
      case Height::Wave: {
        const double k = 2.0 * M_PI / wave_period_;
        return wave_amplitude_ * (std::sin(k * x) + std::sin(k * y));
      }
      case Height::FilteredNoise:
        return noise_x_.at(x) + noise_y_.at(y);
    }
    return 0.0;
  }

  bool feasible(double x, double y) const {
    switch (feas_) {
      case Feasibility::Flat:
        return true;
      case Feasibility::BalanceBeam:
        return std::abs(y) <= beam_half_width_;
      case Feasibility::Gap:
        return x <= gap_x_ || x >= gap_x_ + gap_width_;
      case Feasibility::SteppingStones: {
        if (x < stones_.platform_end) return true;
        return on_stone_axis(stone_x_, x) && on_stone_axis(stone_y_, y);
      }
    }
    return true;
  }

  Feasibility feasibility_kind() const { return feas_; }
  Height height_kind() const { return height_; }
  const std::vector<double>& stone_centers_x() const { return stone_x_; }
  const std::vector<double>& stone_centers_y() const { return stone_y_; }
  const SteppingStoneParams& stone_params() const { return stones_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["feasibility"] = feas_name();
    j["height"] = height_name();
    switch (feas_) {
      case Feasibility::SteppingStones: {
        j["stones"] = {{"spacing_min", stones_.spacing_min},
                       {"spacing_max", stones_.spacing_max},
                       {"stone_size", stones_.stone_size},
                       {"edge_margin", stones_.edge_margin},
                       {"seed", stones_.seed},
                       {"platform_end", stones_.platform_end},
                       {"centers_x", stone_x_},
                       {"centers_y", stone_y_}};
        auto& rects = j["stones"]["rects"];
        rects = nlohmann::json::array();
        const double h = stones_.stone_size / 2.0;
        for (double cx : stone_x_)
          for (double cy : stone_y_)
            rects.push_back({cx - h, cy - h, cx + h, cy + h});
        break;
      }
      case Feasibility::BalanceBeam:
        j["beam_half_width"] = beam_half_width_;
        break;
      case Feasibility::Gap:
        j["gap"] = {{"x_position", gap_x_}, {"width", gap_width_}};
        break;
      case Feasibility::Flat:
        break;
    }
    if (height_ == Height::Wave)
      j["wave"] = {{"period", wave_period_},
                   {"peak_to_valley", 4.0 * wave_amplitude_}};
    if (height_ == Height::FilteredNoise)
      j["noise"] = {{"seed", noise_seed_},
                    {"amplitude", noise_amplitude_},
                    {"max_slope_deg", noise_max_slope_deg_}};
    return j;
  }

 private:
  static constexpr double kNoiseHalfExtent = 25.0;

  static std::vector<double> tile_axis(double lo, double hi,
                                       const SteppingStoneParams& p, Rng& rng) {
    std::vector<double> centers;
    double c = lo + p.stone_size / 2.0;
    while (c + p.stone_size / 2.0 <= hi) {
      centers.push_back(c);
      c += p.stone_size + rng.uniform(p.spacing_min, p.spacing_max);
    }
    return centers;
  }

  bool on_stone_axis(const std::vector<double>& centers, double v) const {
    const double reach = stones_.stone_size / 2.0 - stones_.edge_margin;
    if (reach <= 0.0) return false;
    auto it = std::lower_bound(centers.begin(), centers.end(), v);
    if (it != centers.end() && std::abs(*it - v) <= reach) return true;
    if (it != centers.begin() && std::abs(*(it - 1) - v) <= reach) return true;
    return false;
  }

  std::string feas_name() const {
    switch (feas_) {
      case Feasibility::Flat: return "flat";
      case Feasibility::SteppingStones: return "stepping_stones";
      case Feasibility::BalanceBeam: return "balance_beam";
      case Feasibility::Gap: return "gap";
    }
    return "flat";
  }

  std::string height_name() const {
    switch (height_) {
      case Height::Zero: return "zero";
      case Height::Wave: return "wave";
      case Height::FilteredNoise: return "filtered_noise";
    }
    return "zero";
  }

  Feasibility feas_ = Feasibility::Flat;
  Height height_ = Height::Zero;
  SteppingStoneParams stones_;
  std::vector<double> stone_x_, stone_y_;
  double beam_half_width_ = 0.05;
  double gap_x_ = 1.0, gap_width_ = 0.12;
  double wave_period_ = 2.5, wave_amplitude_ = 0.175;
  std::uint64_t noise_seed_ = 0;
  double noise_amplitude_ = 0.24, noise_max_slope_deg_ = 20.0;
  NoiseProfile noise_x_, noise_y_;
};

inline Terrain stepping_stones_laikago(std::uint64_t seed) {
  SteppingStoneParams p;
  p.spacing_min = 0.10;
  p.spacing_max = 0.20;
  p.seed = seed;
  return Terrain::stepping_stones(p);
}

inline Terrain stepping_stones_a1(std::uint64_t seed) {
  SteppingStoneParams p;
  p.spacing_min = 0.05;
  p.spacing_max = 0.15;
  p.seed = seed;
  return Terrain::stepping_stones(p);
}

/// Square sample patch centered on the robot: feasibility flag and
/// terrain height per point.
struct FeasibilityGrid {
  Vec2 center = Vec2::Zero();
  double resolution = 0.02;
  double extent = 1.0;
  int points_per_side = 51;
  std::vector<std::uint8_t> ok;
  std::vector<double> height;

  Vec2 point(int ix, int iy) const {
    return Vec2(center.x() - extent / 2.0 + ix * resolution,
                center.y() - extent / 2.0 + iy * resolution);
  }
  int index(int ix, int iy) const { return ix * points_per_side + iy; }
};

inline FeasibilityGrid local_grid(const Terrain& terrain, const Vec2& center,
                                  double resolution = 0.02,
                                  double extent = 1.0) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution <= 0");
  FeasibilityGrid grid;
  grid.center = center;
  grid.resolution = resolution;
  grid.extent = extent;
  grid.points_per_side = static_cast<int>(std::lround(extent / resolution)) + 1;
  const int n = grid.points_per_side;
  grid.ok.resize(static_cast<std::size_t>(n) * n);
  grid.height.resize(static_cast<std::size_t>(n) * n);
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      const Vec2 pt = grid.point(ix, iy);
      const int k = grid.index(ix, iy);
      grid.ok[k] = terrain.feasible(pt.x(), pt.y()) ? 1 : 0;
      grid.height[k] = terrain.height_at(pt.x(), pt.y());
    }
  }
  return grid;
}

/// Closest feasible grid point to `target` (Euclidean), ties broken by
/// lexicographic (x, then y) order. Empty feasible set means there is
/// nowhere to step; the caller treats that as episode failure. The
/// optional predicate restricts the candidate set (e.g. to points within
/// leg reach).
template <typename Accept>
inline std::optional<Vec2> snap_to_feasible_if(const FeasibilityGrid& grid,
                                               const Vec2& target,
                                               Accept accept) {
  const int n = grid.points_per_side;
  double best = std::numeric_limits<double>::infinity();
  int best_ix = -1, best_iy = -1;
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      const int k = grid.index(ix, iy);
      if (!grid.ok[k]) continue;
      const Vec2 pt = grid.point(ix, iy);
      if (!accept(pt, grid.height[k])) continue;
      const double d2 = (pt - target).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_ix = ix;
        best_iy = iy;
      }
    }
  }
  if (best_ix < 0) return std::nullopt;
  return grid.point(best_ix, best_iy);
}

inline std::optional<Vec2> snap_to_feasible(const FeasibilityGrid& grid,
                                            const Vec2& target) {
  return snap_to_feasible_if(grid, target,
                             [](const Vec2&, double) { return true; });
}

}  // namespace cml
