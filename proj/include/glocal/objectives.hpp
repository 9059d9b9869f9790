#pragma once

#include "glocal/layers.hpp"
#include "glocal/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace glocal {

inline constexpr double kProbabilityClamp = 1e-7;

struct LossWithGradient {
  double value = 0.0;
  Tensor gradient;
};

/// Mean of -(1 - p_t)^eta * log(p_t) with p_t = prob where target = 1 and
/// 1 - prob where target = 0. Probabilities are clamped to [1e-7, 1 - 1e-7];
/// the gradient is taken with respect to `prob` and is zero where clamping is active.
LossWithGradient focal_loss(const Tensor& prob, const Tensor& target, double eta = 2.0);

/// One-vs-rest focal loss summed over classes. `prob` is N x H x W.
LossWithGradient focal_loss(const Tensor& prob, const SegmentationMap& target, double eta = 2.0);

/// Mean absolute difference; subgradient sign(a - b) / count, zero at ties.
LossWithGradient l1_loss(const Tensor& generated, const Tensor& target);

/// Maps an image to a list of feature layers.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Tensor> extract(const Tensor& image) const = 0;
  virtual std::size_t layer_count() const = 0;
};

/// Single layer equal to the input.
class IdentityExtractor final : public FeatureExtractor {
 public:
  std::vector<Tensor> extract(const Tensor& image) const override { return {image}; }
  std::size_t layer_count() const override { return 1; }
};

/// Three strided 3x3 convolution stages with ReLU; each stage output is a layer.
class ConvStackExtractor final : public FeatureExtractor {
 public:
  explicit ConvStackExtractor(std::uint64_t seed, Index in_channels = 3);
  explicit ConvStackExtractor(std::vector<Conv2d> stages) : stages_(std::move(stages)) {}

  std::vector<Tensor> extract(const Tensor& image) const override;
  std::size_t layer_count() const override { return stages_.size(); }
  const std::vector<Conv2d>& stages() const { return stages_; }

 private:
  std::vector<Conv2d> stages_;
};

/// sum_k |phi_k(a) - phi_k(b)|^2 / numel(phi_k).
double perceptual_loss(const Tensor& generated, const Tensor& target, const FeatureExtractor& extractor,
                       std::span<const std::size_t> layers);

/// mean log(1 - D_fake) + mean log(D_real), inputs clamped to [1e-7, 1 - 1e-7].
double adversarial_loss(std::span<const double> real_scores, std::span<const double> fake_scores);

struct LossWeights {
  double segmentation = 1.0;
  double l1 = 1.0;
  double perceptual = 1.0;
  double adversarial = 1.0;
};

struct LossParts {
  double segmentation = 0.0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double adversarial = 0.0;
};

double total_loss(const LossParts& parts, const LossWeights& weights);

struct FiniteDiffOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  /// Number of coordinates probed; all of them when the input is smaller.
  std::size_t samples = 64;
  std::uint64_t seed = 7;
};

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

using LossFunction = std::function<LossWithGradient(const Tensor&)>;

/// Central differences against the analytic gradient on sampled coordinates.
/// The difference quotient uses the realized float step (x+h) - (x-h).
FiniteDiffReport finite_diff_check(const LossFunction& loss, const Tensor& input, const FiniteDiffOptions& options = {});

}  // namespace glocal
