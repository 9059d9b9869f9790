#pragma once

#include "glocal/tensor.hpp"

#include <vector>

namespace glocal {

/// N x C per-region style vectors. Rows of absent regions are exactly zero.
struct StyleCodeMatrix {
  MatrixXf codes;
  std::vector<bool> present;

  StyleCodeMatrix() = default;
  StyleCodeMatrix(MatrixXf codes_, std::vector<bool> present_);

  Index regions() const { return codes.rows(); }
  Index channels() const { return codes.cols(); }
  Index present_count() const;
};

/// Labels treated as person foreground. Default: every label except 0.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<int> labels) : labels_(std::move(labels)) {}
  static LabelSet all_but_background(int num_labels);

  bool contains(int label) const;
  const std::vector<int>& labels() const { return labels_; }

 private:
  std::vector<int> labels_;
};

/// Row n = mean feature over pixels labelled n. When `exclude` is given,
/// pixels flagged in it are left out of every region.
StyleCodeMatrix region_avg_pool(const Tensor& features, const SegmentationMap& seg, const PixelMask* exclude = nullptr);

/// flag(p) = [seg(p) in foreground] * invisible(p).
OcclusionMask occlusion_mask(const SegmentationMap& seg, const VisibilityMap& visibility, const LabelSet& foreground);

/// output(:, p) = style row seg(p).
Tensor broadcast_styles(const StyleCodeMatrix& styles, const SegmentationMap& seg);

/// 1x1 convolution over style vectors: present rows map to W * row + b.
StyleCodeMatrix style_conv(const StyleCodeMatrix& styles, const MatrixXf& weight, const VectorXf& bias);

/// gamma * channel_normalize(features) + beta.
Tensor modulate(const Tensor& features, const Tensor& gamma, const Tensor& beta, float epsilon = 1e-5f);

}  // namespace glocal
