#pragma once

#include <cmath>
#include <cstdint>

namespace cml {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic PRNG with portable bit-exact output across platforms;
/// std::normal_distribution is implementation-defined, so normals are
/// produced with Box-Muller from two uniforms (no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // one warmup step decorrelates small consecutive seeds
    splitmix64(state_);
  }

  /// Derives an independent stream, e.g. per environment index.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t s = state_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace cml
