#pragma once

#include <cmath>
#include <cstdint>

#include "isonorm/matrix.hpp"

namespace isonorm {

// Counter-based generator: output i depends only on (seed, i), so a run's
// random stream is reproducible regardless of how work is scheduled.
// splitmix64 finalizer over seed + i * golden-ratio increment.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (std::normal_distribution is not
  // reproducible across standard libraries; this is).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Independent deterministic substream, e.g. one per teacher.
  CounterRng fork(std::uint64_t tag) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull * (tag + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return CounterRng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline void fill_normal(CounterRng& rng, Matrix& m) {
  for (double& x : m.data) x = rng.normal();
}

inline void fill_normal(CounterRng& rng, Vector& v) {
  for (double& x : v) x = rng.normal();
}

inline Matrix normal_matrix(CounterRng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  fill_normal(rng, m);
  return m;
}

}  // namespace isonorm
