#pragma once

#include <cmath>
#include <cstdint>

#include "equiaug/types.hpp"

namespace equiaug {

/// Counter-free seed mixing (splitmix64). Used to derive independent
/// per-stage / per-episode streams from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random source. All sampling in the project goes through an
/// explicitly passed Rng; there is no global generator. The raw engine is
/// xoshiro-free: a splitmix64 stream, which is reproducible across platforms
/// (no reliance on std::distribution implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(mix_seed(seed, 0)) {}

  /// Independent stream derived from this generator's seed lineage.
  Rng derive(std::uint64_t stream) const { return Rng(mix_seed(state_, stream)); }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  scalar_t uniform() { return static_cast<scalar_t>(next_u64() >> 11) * 0x1.0p-53; }

  scalar_t uniform(scalar_t lo, scalar_t hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (deterministic, two uniforms per draw).
  scalar_t normal() {
    scalar_t u1 = uniform();
    scalar_t u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  Vector uniform_vector(index_t n, scalar_t lo, scalar_t hi) {
    Vector v(n);
    for (index_t i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Matrix uniform_matrix(index_t rows, index_t cols, scalar_t lo, scalar_t hi) {
    Matrix m(rows, cols);
    for (index_t r = 0; r < rows; ++r)
      for (index_t c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
    return m;
  }

 private:
  std::uint64_t state_;
};

}  // namespace equiaug
