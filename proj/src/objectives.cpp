#include "glocal/objectives.hpp"

#include "glocal/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace glocal {

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

void require_eta(double eta) {
  if (!(eta >= 0.0)) throw Error("focal_loss: eta must be non-negative");
}

// Loss and d(loss)/d(p_t) for one pixel.
std::pair<double, double> focal_term(double pt, double eta) {
  const double q = 1.0 - pt;
  const double log_pt = std::log(pt);
  const double modulating = eta == 0.0 ? 1.0 : std::pow(q, eta);
  const double loss = -modulating * log_pt;
  const double d_modulating = eta == 0.0 ? 0.0 : -eta * std::pow(q, eta - 1.0);
  const double grad = -(d_modulating * log_pt + modulating / pt);
  return {loss, grad};
}

}  // namespace

LossWithGradient focal_loss(const Tensor& prob, const Tensor& target, double eta) {
  require_eta(eta);
  require_same_shape(prob, target, "focal_loss");
  require_finite(prob, "focal_loss");
  LossWithGradient out{0.0, Tensor(prob.shape())};
  const double count = static_cast<double>(prob.size());
  double sum = 0.0;
  for (Index i = 0; i < prob.size(); ++i) {
    const float t = target[i];
    if (t != 0.0f && t != 1.0f) throw Error("focal_loss: target map must be binary");
    const double raw = prob[i];
    const double p = clamp_probability(raw);
    const bool positive = t == 1.0f;
    const double pt = positive ? p : 1.0 - p;
    const auto [loss, d_pt] = focal_term(pt, eta);
    sum += loss;
    const bool clamped = raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp;
    out.gradient[i] = clamped ? 0.0f : static_cast<float>((positive ? d_pt : -d_pt) / count);
  }
  out.value = sum / count;
  return out;
}

LossWithGradient focal_loss(const Tensor& prob, const SegmentationMap& target, double eta) {
  require_chw(prob, "focal_loss");
  if (prob.channels() != target.num_labels() || prob.height() != target.height() || prob.width() != target.width()) {
    throw Error("focal_loss: probability map " + shape_string(prob.shape()) + " does not match segmentation");
  }
  LossWithGradient out{0.0, Tensor(prob.shape())};
  const Index plane = prob.plane_size();
  for (Index c = 0; c < prob.channels(); ++c) {
    Tensor p({plane});
    Tensor t({plane});
    for (Index i = 0; i < plane; ++i) {
      p[i] = prob[c * plane + i];
      t[i] = target.at(i) == c ? 1.0f : 0.0f;
    }
    const auto part = focal_loss(p, t, eta);
    out.value += part.value;
    out.gradient.flat().segment(c * plane, plane) = part.gradient.flat();
  }
  return out;
}

LossWithGradient l1_loss(const Tensor& generated, const Tensor& target) {
  require_same_shape(generated, target, "l1_loss");
  require_finite(generated, "l1_loss");
  require_finite(target, "l1_loss");
  LossWithGradient out{0.0, Tensor(generated.shape())};
  const double count = static_cast<double>(generated.size());
  double sum = 0.0;
  for (Index i = 0; i < generated.size(); ++i) {
    const double diff = double(generated[i]) - double(target[i]);
    sum += std::abs(diff);
    out.gradient[i] = static_cast<float>((diff > 0 ? 1.0 : diff < 0 ? -1.0 : 0.0) / count);
  }
  out.value = sum / count;
  return out;
}

ConvStackExtractor::ConvStackExtractor(std::uint64_t seed, Index in_channels) {
  const Index widths[] = {8, 16, 32};
  Index previous = in_channels;
  for (std::size_t s = 0; s < 3; ++s) {
    stages_.push_back(Conv2d::seeded(previous, widths[s], 3, 2, seed * 1000003ULL + s));
    previous = widths[s];
  }
}

std::vector<Tensor> ConvStackExtractor::extract(const Tensor& image) const {
  std::vector<Tensor> layers;
  Tensor current = image;
  for (const auto& stage : stages_) {
    current = relu(stage(current));
    layers.push_back(current);
  }
  return layers;
}

double perceptual_loss(const Tensor& generated, const Tensor& target, const FeatureExtractor& extractor,
                       std::span<const std::size_t> layers) {
  require_same_shape(generated, target, "perceptual_loss");
  for (std::size_t k : layers) {
    if (k >= extractor.layer_count()) {
      throw Error("perceptual_loss: layer " + std::to_string(k) + " out of range (extractor has " +
                  std::to_string(extractor.layer_count()) + ")");
    }
  }
  const auto a = extractor.extract(generated);
  const auto b = extractor.extract(target);
  double total = 0.0;
  for (std::size_t k : layers) {
    require_same_shape(a[k], b[k], "perceptual_loss");
    const double sq = (a[k].flat().cast<double>() - b[k].flat().cast<double>()).squaredNorm();
    total += sq / static_cast<double>(a[k].size());
  }
  return total;
}

double adversarial_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw Error("adversarial_loss: empty batch");
  double real = 0.0;
  for (double d : real_scores) real += std::log(clamp_probability(d));
  double fake = 0.0;
  for (double d : fake_scores) fake += std::log(1.0 - clamp_probability(d));
  return fake / static_cast<double>(fake_scores.size()) + real / static_cast<double>(real_scores.size());
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  return weights.segmentation * parts.segmentation + weights.l1 * parts.l1 + weights.perceptual * parts.perceptual +
         weights.adversarial * parts.adversarial;
}

FiniteDiffReport finite_diff_check(const LossFunction& loss, const Tensor& input, const FiniteDiffOptions& options) {
  if (!(options.step > 0.0)) throw Error("finite_diff_check: step must be positive");
  const Tensor analytic = loss(input).gradient;
  require_same_shape(analytic, input, "finite_diff_check");

  std::vector<Index> coords(static_cast<std::size_t>(input.size()));
  std::iota(coords.begin(), coords.end(), Index(0));
  if (coords.size() > options.samples) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.samples; ++i) {
      const auto j = i + rng.below(static_cast<std::uint32_t>(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(options.samples);
  }

  FiniteDiffReport report;
  Tensor probe = input;
  for (Index idx : coords) {
    const float x = input[idx];
    const float plus = static_cast<float>(x + options.step);
    const float minus = static_cast<float>(x - options.step);
    probe[idx] = plus;
    const double f_plus = loss(probe).value;
    probe[idx] = minus;
    const double f_minus = loss(probe).value;
    probe[idx] = x;
    const double g_fd = (f_plus - f_minus) / (double(plus) - double(minus));
    const double g_a = analytic[idx];
    const double denom = std::max({std::abs(g_a), std::abs(g_fd), 1e-8});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(g_a - g_fd) / denom);
  }
  report.coordinates = coords.size();
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace glocal
