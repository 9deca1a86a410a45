#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "bestanp/geometry.hpp"

namespace bestanp {

// Seeded random source. The engine is std::mt19937_64; Gaussian samples come
// from std::normal_distribution, so sequences are reproducible for a given
// standard library. Independent substreams are derived by hashing a path of
// indices (e.g. seed, sweep index, trial index) with splitmix64.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  double normal() { return normal_(engine_); }
  double normal(double sigma) { return sigma * normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  // Uniformly distributed direction on the unit sphere.
  Vec3 unit_vector();

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bestanp
