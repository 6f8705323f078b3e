#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "mgc/tensor.hpp"

namespace mgc {

/// Seeded generator with distribution code of our own, so that sampled
/// values do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi].
  long uniform_int(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(engine_() % span);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal with standard deviation `sd`, resampled outside +-2 sd.
  double truncated_normal(double sd) {
    double z = normal();
    while (std::abs(z) > 2.0) z = normal();
    return z * sd;
  }

  template <typename T>
  Tensor<T> uniform_tensor(Shape shape, double lo, double hi) {
    Tensor<T> t(shape);
    for (T& v : t.data()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

  template <typename T>
  Tensor<T> normal_tensor(Shape shape, double sd = 1.0) {
    Tensor<T> t(shape);
    for (T& v : t.data()) v = static_cast<T>(normal() * sd);
    return t;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mgc
