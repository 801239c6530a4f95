#pragma once

#include "pwlsf/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace pwlsf {

// Deterministic sampling helper. mt19937_64 has a standard-specified output
// sequence, and the transforms below avoid stdlib distribution objects, so a
// given seed produces the same draws on any conforming implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    do { u = uniform(); } while (u == 0.0);
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(6.283185307179586477 * v);
    have_spare_ = true;
    return r * std::cos(6.283185307179586477 * v);
  }

  // Uniform direction on the unit sphere in R^k.
  Vector sphere(Index k) {
    Vector v(k);
    double n = 0.0;
    do {
      for (Index i = 0; i < k; ++i) v(i) = normal();
      n = v.norm();
    } while (n == 0.0);
    return v / n;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives a per-task seed so parallel samples are independent of scheduling.
inline std::uint64_t task_seed(std::uint64_t base, std::uint64_t task) {
  // splitmix64 over the combined word
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (task + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Parallel map over [0, n) with deterministic aggregation: fn(i) must write
// only to slot i of its output. Worker count comes from PWLSF_WORKERS when
// set, else hardware concurrency. Exceptions are rethrown on the caller.
void parallel_for(Index n, const std::function<void(Index)>& fn);

// FNV-1a 64-bit, used for configuration fingerprints in run manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pwlsf
