#pragma once

#include "glocal/tensor.hpp"

#include <cstdint>

namespace glocal {

/// 2-D convolution with "same" zero padding (k / 2) and integer stride.
/// Weight is Cout x Cin x k x k.
struct Conv2d {
  Tensor weight;
  VectorXf bias;
  int stride = 1;

  /// Uniform He-style initialization from a fixed seed; bias starts at zero.
  static Conv2d seeded(Index in_channels, Index out_channels, int kernel, int stride, std::uint64_t seed,
                       float gain = 1.0f);
  Index in_channels() const { return weight.extent(1); }
  Index out_channels() const { return weight.extent(0); }
  int kernel() const { return static_cast<int>(weight.extent(2)); }

  /// Throws unless weight is rank 4 with square odd kernel and bias matches.
  void validate() const;
  Tensor operator()(const Tensor& input) const;
};

Tensor relu(Tensor t);
Tensor sigmoid(Tensor t);

}  // namespace glocal
