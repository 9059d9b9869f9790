#include "glocal/objectives.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace glocal;

constexpr double kPerceptualFixture = 0x1.38e3f4c8fb175p-2;

namespace {

Tensor binary_map(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = rng.below(2) ? 1.0f : 0.0f;
  return t;
}

}  // namespace

TEST_CASE("focal loss of a perfect prediction is zero") {
  const Tensor t({4}, VectorXf((VectorXf(4) << 1, 0, 1, 0).finished()));
  CHECK(focal_loss(t, t, 2.0).value <= 1e-6);
}

TEST_CASE("focal loss single pixel hand value") {
  const Tensor p({1}, 0.5f), t({1}, 1.0f);
  CHECK(std::abs(focal_loss(p, t, 2.0).value - 0.25 * std::numbers::ln2) <= 1e-6);
}

TEST_CASE("focal loss with eta 0 is cross-entropy") {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = rng.uniform_tensor({6, 5}, 0.0f, 1.0f);
    const Tensor t = binary_map(rng, {6, 5});
    CHECK(std::abs(focal_loss(p, t, 0.0).value - oracle::bce(p, t)) <= 1e-7);
  }
}

TEST_CASE("focal loss is non-negative and decreasing in p_t") {
  Rng rng(52);
  const Tensor t({1}, 1.0f);
  for (double eta : {0.0, 0.5, 2.0, 5.0}) {
    double previous = std::numeric_limits<double>::infinity();
    for (float p = 0.01f; p < 1.0f; p += 0.01f) {
      const double v = focal_loss(Tensor({1}, p), t, eta).value;
      CHECK(v >= 0.0);
      CHECK(v <= previous);
      previous = v;
    }
  }
}

TEST_CASE("focal loss gradient matches central differences") {
  Rng rng(53);
  for (double eta : {0.0, 1.0, 2.0, 3.5}) {
    const Tensor p = rng.uniform_tensor({4, 6}, 0.05f, 0.95f);
    const Tensor t = binary_map(rng, {4, 6});
    const auto report = finite_diff_check([&](const Tensor& x) { return focal_loss(x, t, eta); }, p, {1e-4, 1e-3, 64, 3});
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-3);
  }
}

TEST_CASE("focal loss argument checks") {
  const Tensor p({2}, 0.5f), t({2}, 1.0f);
  CHECK_THROWS_AS(focal_loss(p, t, -1.0), Error);
  CHECK_THROWS_AS(focal_loss(p, Tensor({3}, 1.0f), 2.0), Error);
  CHECK_THROWS_AS(focal_loss(p, Tensor({2}, 0.5f), 2.0), Error);
}

TEST_CASE("multi-class focal loss sums one-vs-rest terms") {
  Rng rng(54);
  const SegmentationMap seg = testing_support::random_segmentation(rng, 3, 4, 3);
  const Tensor p = rng.uniform_tensor({3, 3, 4}, 0.05f, 0.95f);
  double expected = 0.0;
  for (int c = 0; c < 3; ++c) {
    Tensor pc({12}), tc({12});
    for (Index i = 0; i < 12; ++i) {
      pc[i] = p[c * 12 + i];
      tc[i] = seg.at(i) == c ? 1.0f : 0.0f;
    }
    expected += focal_loss(pc, tc, 2.0).value;
  }
  const auto full = focal_loss(p, seg, 2.0);
  CHECK(full.value == doctest::Approx(expected).epsilon(1e-12));
  const auto report = finite_diff_check([&](const Tensor& x) { return focal_loss(x, seg, 2.0); }, p, {1e-4, 1e-3, 36, 4});
  CHECK(report.max_relative_error < 1e-3);
}

TEST_CASE("l1 loss values and gradient") {
  Rng rng(55);
  const Tensor a = rng.uniform_tensor({3, 4, 4});
  CHECK(l1_loss(a, a).value == 0.0);
  Tensor b = a;
  b.flat().array() += 1.0f;
  CHECK(l1_loss(b, a).value == doctest::Approx(1.0).epsilon(1e-6));

  const Tensor c = rng.uniform_tensor({3, 4, 4});
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) acc += std::abs(double(a[i]) - double(c[i]));
  CHECK(std::abs(l1_loss(a, c).value - acc / double(a.size())) <= 1e-6);

  const auto report = finite_diff_check([&](const Tensor& x) { return l1_loss(x, c); }, a, {1e-5, 1e-4, 48, 5});
  CHECK(report.max_relative_error < 1e-4);
  CHECK(l1_loss(a, a).gradient.flat().isZero(0));
  CHECK_THROWS_AS(l1_loss(a, Tensor::chw(3, 4, 3)), Error);
}

TEST_CASE("l1 loss triangle inequality") {
  Rng rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = rng.uniform_tensor({2, 3, 3}), y = rng.uniform_tensor({2, 3, 3}), z = rng.uniform_tensor({2, 3, 3});
    CHECK(l1_loss(x, z).value <= l1_loss(x, y).value + l1_loss(y, z).value + 1e-6);
  }
}

TEST_CASE("perceptual loss identities") {
  Rng rng(57);
  const Tensor a = rng.uniform_tensor({3, 8, 6}, 0, 1), b = rng.uniform_tensor({3, 8, 6}, 0, 1);
  const ConvStackExtractor stack(19);
  const std::vector<std::size_t> all{0, 1, 2};
  CHECK(perceptual_loss(a, a, stack, all) == 0.0);
  CHECK(stack.layer_count() == 3);
  const auto layers = stack.extract(a);
  CHECK(layers[0].shape() == Shape{8, 4, 3});
  CHECK(layers[2].shape() == Shape{32, 1, 1});

  const IdentityExtractor id;
  const std::vector<std::size_t> first{0};
  const double mse = (a.flat().cast<double>() - b.flat().cast<double>()).squaredNorm() / double(a.size());
  CHECK(perceptual_loss(a, b, id, first) == doctest::Approx(mse).epsilon(1e-12));
  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(perceptual_loss(a, b, stack, bad), Error);
}

TEST_CASE("perceptual loss regression fixture") {
  Rng rng(58);
  const Tensor a = rng.uniform_tensor({3, 16, 12}, 0, 1), b = rng.uniform_tensor({3, 16, 12}, 0, 1);
  const std::vector<std::size_t> all{0, 1, 2};
  const double value = perceptual_loss(a, b, ConvStackExtractor(19), all);
  CHECK(value == perceptual_loss(a, b, ConvStackExtractor(19), all));
  // Recorded from the first run of this build.
  CHECK(value == kPerceptualFixture);
}

TEST_CASE("adversarial loss values") {
  const std::vector<double> half{0.5};
  CHECK(adversarial_loss(half, half) == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
  const std::vector<double> real{1.0 - 1e-7}, fake{1e-7};
  CHECK(std::abs(adversarial_loss(real, fake)) <= 1e-6);

  Rng rng(59);
  std::vector<double> r, f;
  for (int i = 0; i < 17; ++i) r.push_back(rng.uniform(0.01f, 0.99f));
  for (int i = 0; i < 9; ++i) f.push_back(rng.uniform(0.01f, 0.99f));
  double lr = 0.0, lf = 0.0;
  for (double v : r) lr += std::log(v);
  for (double v : f) lf += std::log(1.0 - v);
  CHECK(std::abs(adversarial_loss(r, f) - (lr / 17 + lf / 9)) <= 1e-7);
  const std::vector<double> clamped{0.0};
  CHECK(std::isfinite(adversarial_loss(clamped, std::vector<double>{1.0})));
  CHECK_THROWS_AS(adversarial_loss({}, half), Error);
}

TEST_CASE("total loss weighting") {
  const LossParts parts{0.3, 1.7, 2.9, -1.1};
  CHECK(total_loss(parts, {0, 0, 0, 0}) == 0.0);
  CHECK(total_loss(parts, {1, 0, 0, 0}) == parts.segmentation);
  CHECK(total_loss(parts, {0, 1, 0, 0}) == parts.l1);
  CHECK(total_loss(parts, {0, 0, 1, 0}) == parts.perceptual);
  CHECK(total_loss(parts, {0, 0, 0, 1}) == parts.adversarial);

  Rng rng(60);
  for (int trial = 0; trial < 10; ++trial) {
    const LossWeights w{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)};
    const LossParts p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double dot = w.segmentation * p.segmentation + w.l1 * p.l1 + w.perceptual * p.perceptual + w.adversarial * p.adversarial;
    CHECK(std::abs(total_loss(p, w) - dot) <= 1e-7);
    LossWeights doubled = w;
    doubled.l1 *= 2.0;
    CHECK(std::abs(total_loss(p, doubled) - total_loss(p, w) - w.l1 * p.l1) <= 1e-7);
  }
}

TEST_CASE("finite difference check on a flat function") {
  const Tensor x({5}, 0.3f);
  const auto report = finite_diff_check([](const Tensor& t) { return LossWithGradient{4.0, Tensor(t.shape())}; }, x);
  CHECK(report.passed);
  CHECK(report.max_relative_error == 0.0);
  CHECK(report.coordinates == 5);
  CHECK_THROWS_AS(finite_diff_check([](const Tensor& t) { return LossWithGradient{0.0, t}; }, x, {0.0, 1e-3, 4, 1}), Error);
}

TEST_CASE("finite difference check catches a wrong gradient") {
  const Tensor x({3}, 0.5f);
  auto wrong = [](const Tensor& t) {
    LossWithGradient out{t.flat().cast<double>().squaredNorm(), t};
    return out;  // true gradient is 2t
  };
  CHECK_FALSE(finite_diff_check(wrong, x).passed);
}
