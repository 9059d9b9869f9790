#pragma once

#include "glocal/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace glocal {

/// Seeded generator with distributions built directly on mt19937 output, so
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform() { return static_cast<float>(engine_() >> 8) * 0x1.0p-24f; }
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n) {
    const std::uint64_t wide = std::uint64_t(engine_()) * n;
    return static_cast<std::uint32_t>(wide >> 32);
  }

  /// Standard normal via Box-Muller.
  float normal() {
    const double u1 = (static_cast<double>(engine_()) + 1.0) * 0x1.0p-32;
    const double u2 = static_cast<double>(engine_()) * 0x1.0p-32;
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2));
  }

  Tensor uniform_tensor(Shape shape, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (float& v : t.values()) v = uniform(lo, hi);
    return t;
  }

  MatrixXf uniform_matrix(Index rows, Index cols, float lo = -1.0f, float hi = 1.0f) {
    MatrixXf m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

  std::mt19937& engine() { return engine_; }

 private:
  std::mt19937 engine_;
};

}  // namespace glocal
