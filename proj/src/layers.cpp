#include "glocal/layers.hpp"

#include "glocal/random.hpp"

#include <cmath>
#include <string>

namespace glocal {

Conv2d Conv2d::seeded(Index in_channels, Index out_channels, int kernel, int stride, std::uint64_t seed, float gain) {
  Rng rng(seed);
  const float bound = gain * std::sqrt(6.0f / static_cast<float>(in_channels * kernel * kernel));
  Conv2d conv{rng.uniform_tensor({out_channels, in_channels, kernel, kernel}, -bound, bound),
              VectorXf::Zero(out_channels), stride};
  return conv;
}

void Conv2d::validate() const {
  if (weight.rank() != 4 || weight.extent(2) != weight.extent(3) || weight.extent(2) % 2 == 0) {
    throw Error("conv2d: weight must be Cout x Cin x k x k with odd k, got " + shape_string(weight.shape()));
  }
  if (bias.size() != weight.extent(0)) throw Error("conv2d: bias length does not match output channels");
  if (stride < 1) throw Error("conv2d: stride must be positive");
}

Tensor Conv2d::operator()(const Tensor& input) const {
  validate();
  require_chw(input, "conv2d");
  if (input.channels() != in_channels()) {
    throw Error("conv2d: expected " + std::to_string(in_channels()) + " input channels, got " +
                std::to_string(input.channels()));
  }
  const Index k = kernel();
  const Index half = k / 2;
  const Index height = input.height();
  const Index width = input.width();
  const Index out_h = (height - 1) / stride + 1;
  const Index out_w = (width - 1) / stride + 1;
  Tensor out = Tensor::chw(out_channels(), out_h, out_w);

  for (Index o = 0; o < out_channels(); ++o) {
    for (Index y = 0; y < out_h; ++y) {
      for (Index x = 0; x < out_w; ++x) {
        float acc = bias[o];
        for (Index c = 0; c < in_channels(); ++c) {
          const float* w = weight.flat().data() + ((o * in_channels() + c) * k) * k;
          for (Index ky = 0; ky < k; ++ky) {
            const Index yy = y * stride + ky - half;
            if (yy < 0 || yy >= height) continue;
            for (Index kx = 0; kx < k; ++kx) {
              const Index xx = x * stride + kx - half;
              if (xx < 0 || xx >= width) continue;
              acc += w[ky * k + kx] * input(c, yy, xx);
            }
          }
        }
        out(o, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor relu(Tensor t) {
  t.flat() = t.flat().cwiseMax(0.0f);
  return t;
}

Tensor sigmoid(Tensor t) {
  for (float& v : t.values()) v = 1.0f / (1.0f + std::exp(-v));
  return t;
}

}  // namespace glocal
