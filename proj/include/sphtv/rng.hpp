#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sphtv {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Order-sensitive seed derivation: children of the same parent differ,
// and (a,b) never collides with (b,a).
inline std::uint64_t seed_child(std::uint64_t parent, std::uint64_t key) {
  return mix64(parent ^ (0x9e3779b97f4a7c15ull + mix64(key)));
}

// Deterministic stream with explicit Box-Muller normals. All consumers of
// randomness (masks, noise, synthetic maps, solver spot checks) go through
// this class so that byte-identical reruns only depend on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // in [0,1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // in (0,1], safe under log()
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // unbiased integer in [0,n) by rejection
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= lim);
    return x % n;
  }

  // standard normal, Box-Muller pair with one value cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sphtv
