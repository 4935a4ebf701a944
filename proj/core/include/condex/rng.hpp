#pragma once

#include <cstdint>
#include <random>

#include "condex/stats.hpp"

namespace condex {

// Deterministic random source.  All stochastic routines in the library take a
// seed (or an Rng) explicitly so that reruns with the same inputs are
// byte-identical.  Uniforms are derived from mt19937_64 with fixed explicit
// formulas rather than std::*_distribution, whose streams are not pinned down
// by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Independent child stream for replicate `stream` of a run seeded by
  // `seed`; splitmix64-style mixing keeps streams well separated.
  static Rng child(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::uint64_t raw() { return gen_(); }

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double u01() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential() { return -std::log(u01()); }

  double normal() { return normal_quantile(u01()); }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::mt19937_64 gen_;
};

}  // namespace condex
