#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "growthgr/common.hpp"

namespace growthgr {

// splitmix64 finalizer; also the seed-mixing primitive for per-event streams.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t seed_mix(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

template <typename... Rest>
inline uint64_t seed_mix(uint64_t a, uint64_t b, Rest... rest) {
  return seed_mix(seed_mix(a, b), static_cast<uint64_t>(rest)...);
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distributions are hand-rolled because the std ones are implementation
// defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(mix64(seed)) {}

  uint64_t u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; two uniforms per draw, no cached spare.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // [0, n)
  int uniform_int(int n) {
    GGR_CHECK(n > 0, contract_error("uniform_int: n must be positive"));
    return static_cast<int>(gen_() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates over indices 0..n-1.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = gen_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace growthgr
