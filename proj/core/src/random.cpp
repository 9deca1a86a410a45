#include "bestanp/random.hpp"

namespace bestanp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RandomStream RandomStream::derive(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (const std::uint64_t index : path) {
    h = splitmix64(h ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  }
  return RandomStream(h);
}

Vec3 RandomStream::unit_vector() {
  Vec3 v;
  do {
    v = {normal(), normal(), normal()};
  } while (v.squaredNorm() < 1e-20);
  return v.normalized();
}

}  // namespace bestanp
