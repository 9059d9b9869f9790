#include "glocal/local_structure.hpp"

#include <string>

namespace glocal {

ModulationField::ModulationField(Index height_, Index width_, Index channels_, int kernel_, RowMatrixXf taps_,
                                 RowMatrixXf bias_)
    : height(height_), width(width_), channels(channels_), kernel(kernel_), taps(std::move(taps_)),
      bias(std::move(bias_)) {
  if (kernel < 1 || kernel % 2 == 0) throw Error("modulation kernel size must be odd, got " + std::to_string(kernel));
  if (taps.rows() != positions() || taps.cols() != channels * taps_per_channel()) {
    throw Error("modulation taps must be " + std::to_string(positions()) + "x" +
                std::to_string(channels * taps_per_channel()));
  }
  if (bias.rows() != positions() || bias.cols() != channels) {
    throw Error("modulation bias must be " + std::to_string(positions()) + "x" + std::to_string(channels));
  }
  if (!taps.allFinite() || !bias.allFinite()) throw Error("modulation field contains non-finite values");
}

ModulationField ModulationField::zeros(Index height, Index width, Index channels, int kernel) {
  const Index k2 = Index(kernel) * kernel;
  return {height, width, channels, kernel, RowMatrixXf::Zero(height * width, channels * k2),
          RowMatrixXf::Zero(height * width, channels)};
}

LocalCorrelationMap self_correlation(const Tensor& features, const CorrelationOptions& options) {
  require_chw(features, "self_correlation");
  require_finite(features, "self_correlation");
  const int r = options.patch_radius;
  const int d = options.neighborhood_radius;
  if (r < 0 || d < 0) throw Error("self_correlation: radii must be non-negative");

  const Index channels = features.channels();
  const Index height = features.height();
  const Index width = features.width();
  const Index span = 2 * d + 1;

  // Pointwise inner products for every offset, then a box sum over the patch.
  const auto f = features.as_matrix();
  LocalCorrelationMap out{r, d, Tensor::chw(span * span, height, width)};
  Eigen::MatrixXd dots(height, width);
  const double scale = options.normalize ? 1.0 / (double((2 * r + 1) * (2 * r + 1)) * double(channels)) : 1.0;

  for (Index dy = -d; dy <= d; ++dy) {
    for (Index dx = -d; dx <= d; ++dx) {
      for (Index y = 0; y < height; ++y) {
        for (Index x = 0; x < width; ++x) {
          const Index y2 = y + dy;
          const Index x2 = x + dx;
          if (y2 < 0 || y2 >= height || x2 < 0 || x2 >= width) {
            dots(y, x) = 0.0;
            continue;
          }
          dots(y, x) = f.col(y * width + x).cast<double>().dot(f.col(y2 * width + x2).cast<double>());
        }
      }
      auto plane = out.values.plane((dy + d) * span + (dx + d));
      for (Index y = 0; y < height; ++y) {
        for (Index x = 0; x < width; ++x) {
          double acc = 0.0;
          for (Index py = -r; py <= r; ++py) {
            const Index yy = y + py;
            if (yy < 0 || yy >= height) continue;
            for (Index px = -r; px <= r; ++px) {
              const Index xx = x + px;
              if (xx < 0 || xx >= width) continue;
              acc += dots(yy, xx);
            }
          }
          plane(y, x) = static_cast<float>(acc * scale);
        }
      }
    }
  }
  return out;
}

ModulationField predict_modulation(const LocalCorrelationMap& correlation, const MatrixXf& filter_proj,
                                   const MatrixXf& bias_proj, int kernel) {
  const Tensor& fc = correlation.values;
  require_chw(fc, "predict_modulation");
  if (kernel < 1 || kernel % 2 == 0) throw Error("predict_modulation: kernel size must be odd");
  const Index offsets = fc.channels();
  const Index k2 = Index(kernel) * kernel;
  if (filter_proj.cols() != offsets || bias_proj.cols() != offsets) {
    throw Error("predict_modulation: projections expect " + std::to_string(filter_proj.cols()) +
                " correlation channels, map has " + std::to_string(offsets));
  }
  if (filter_proj.rows() != bias_proj.rows() * k2) {
    throw Error("predict_modulation: filter projection must have C*k*k = " + std::to_string(bias_proj.rows() * k2) +
                " rows, has " + std::to_string(filter_proj.rows()));
  }
  const auto m = fc.as_matrix();
  RowMatrixXf taps = (filter_proj * m).transpose();
  RowMatrixXf bias = (bias_proj * m).transpose();
  return {fc.height(), fc.width(), bias_proj.rows(), kernel, std::move(taps), std::move(bias)};
}

Tensor loc_conv(const Tensor& features, const ModulationField& field, const LocConvOptions& options) {
  require_chw(features, "loc_conv");
  if (field.height != features.height() || field.width != features.width() || field.channels != features.channels()) {
    throw Error("loc_conv: modulation field " + std::to_string(field.channels) + "x" + std::to_string(field.height) +
                "x" + std::to_string(field.width) + " does not match features " + shape_string(features.shape()));
  }
  if (field.taps.cols() != field.channels * field.taps_per_channel()) throw Error("loc_conv: tap count mismatch");

  const Tensor normalized = channel_normalize(features, options.epsilon).values;
  const Index height = features.height();
  const Index width = features.width();
  const Index k = field.kernel;
  const Index half = k / 2;
  const Index k2 = k * k;
  const float bias_scale = options.bias_per_tap ? static_cast<float>(k2) : 1.0f;

  Tensor out = Tensor::chw(features.channels(), height, width);
  for (Index c = 0; c < features.channels(); ++c) {
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        const Index l = y * width + x;
        double acc = 0.0;
        for (Index ky = 0; ky < k; ++ky) {
          const Index yy = y + ky - half;
          if (yy < 0 || yy >= height) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index xx = x + kx - half;
            if (xx < 0 || xx >= width) continue;
            acc += double(field.taps(l, c * k2 + ky * k + kx)) * double(normalized(c, yy, xx));
          }
        }
        out(c, y, x) = static_cast<float>(acc + double(bias_scale * field.bias(l, c)));
      }
    }
  }
  return out;
}

}  // namespace glocal
