#pragma once

#include "glocal/tensor.hpp"

namespace glocal {

/// Stack of patch inner products between each position and its (2d+1)^2
/// neighbours. Channel (dy + d) * (2d + 1) + (dx + d) holds offset (dy, dx).
struct LocalCorrelationMap {
  int patch_radius = 0;
  int neighborhood_radius = 0;
  Tensor values;

  Index offsets() const { return Index(2 * neighborhood_radius + 1) * (2 * neighborhood_radius + 1); }
  Index center_channel() const { return offsets() / 2; }
};

/// Per-position, per-channel k x k filters and biases.
///
/// `taps` is (H*W) x (C*k*k): row = position, column c*k*k + ky*k + kx.
/// `bias` is (H*W) x C. The flattened layout is what transport warping acts on.
struct ModulationField {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  int kernel = 1;
  RowMatrixXf taps;
  RowMatrixXf bias;

  ModulationField() = default;
  ModulationField(Index height_, Index width_, Index channels_, int kernel_, RowMatrixXf taps_, RowMatrixXf bias_);
  static ModulationField zeros(Index height, Index width, Index channels, int kernel);

  Index positions() const { return height * width; }
  Index taps_per_channel() const { return Index(kernel) * kernel; }
};

struct CorrelationOptions {
  int patch_radius = 1;
  int neighborhood_radius = 2;
  /// Divide by the patch element count (2r+1)^2 * C.
  bool normalize = true;
};

/// c(i, i+o) = sum_{p in [-r,r]^2} <F(i+p), F(i+o+p)>, zero padded.
LocalCorrelationMap self_correlation(const Tensor& features, const CorrelationOptions& options);

/// Point-wise projections of the correlation stack:
///   taps(l) = filter_proj * F_c(:, l), bias(l) = bias_proj * F_c(:, l).
/// filter_proj is (C*k*k) x D and bias_proj is C x D with D the offset count.
ModulationField predict_modulation(const LocalCorrelationMap& correlation, const MatrixXf& filter_proj,
                                   const MatrixXf& bias_proj, int kernel);

struct LocConvOptions {
  float epsilon = 1e-5f;
  /// Add the bias once per window tap (k*k times) instead of once per position.
  bool bias_per_tap = false;
};

/// F_g(c, l) = sum_{p in N(l)} taps(l, c, p) * normalized(c, p) + bias(l, c),
/// with per-channel normalization of `features` and zero padding.
Tensor loc_conv(const Tensor& features, const ModulationField& field, const LocConvOptions& options = {});

}  // namespace glocal
