#include "glocal/scene.hpp"

#include "glocal/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace glocal {

namespace {

// Normalized (x, y, rx, ry) for the 8-region body layout.
constexpr std::array<std::array<double, 4>, 8> kBodyTemplate = {{
    {0.50, 0.50, 0.00, 0.00},  // background, unused
    {0.50, 0.10, 0.17, 0.07},  // hair
    {0.50, 0.18, 0.13, 0.08},  // face
    {0.50, 0.40, 0.25, 0.16},  // upper clothes
    {0.50, 0.63, 0.20, 0.10},  // pants
    {0.50, 0.33, 0.40, 0.05},  // arms
    {0.50, 0.78, 0.15, 0.10},  // legs
    {0.50, 0.92, 0.19, 0.045}, // shoes
}};

bool inside(const RegionShape& shape, const Eigen::Vector2d& q) {
  const Eigen::Vector2d d = q - shape.center;
  const double c = std::cos(shape.orientation);
  const double s = std::sin(shape.orientation);
  const double u = (c * d.x() + s * d.y()) / shape.radii.x();
  const double v = (-s * d.x() + c * d.y()) / shape.radii.y();
  return u * u + v * v <= 1.0;
}

bool in_frame(Index x, Index y, Index width, Index height) { return x >= 0 && y >= 0 && x < width && y < height; }

SegmentationMap perturb_boundaries(const SegmentationMap& seg, double rate, Rng& rng) {
  SegmentationMap out = seg;
  const Index h = seg.height();
  const Index w = seg.width();
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Index nx[] = {x + 1, x - 1, x, x};
      const Index ny[] = {y, y, y + 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (!in_frame(nx[k], ny[k], w, h) || seg(ny[k], nx[k]) == seg(y, x)) continue;
        if (rng.uniform() < rate) out.set(y, x, seg(ny[k], nx[k]));
        break;
      }
    }
  }
  return out;
}

}  // namespace

SceneLayout random_layout(const PipelineConfig& cfg, std::uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  SceneLayout layout;
  layout.seed = seed;
  const int n = cfg.regions;
  const double w = static_cast<double>(cfg.width);
  const double h = static_cast<double>(cfg.height);
  layout.regions.resize(static_cast<std::size_t>(n));
  layout.motion.resize(static_cast<std::size_t>(n));
  layout.background = Eigen::Vector3f(rng.uniform(0.75f, 0.95f), rng.uniform(0.75f, 0.95f), rng.uniform(0.75f, 0.95f));

  for (int label = 1; label < n; ++label) {
    std::array<double, 4> t;
    if (n == 8) {
      t = kBodyTemplate[static_cast<std::size_t>(label)];
    } else {
      const double step = 0.8 / std::max(n - 2, 1);
      t = {0.5, 0.1 + step * (label - 1), 0.22, 0.45 / (n - 1) + 0.03};
    }
    auto& shape = layout.regions[static_cast<std::size_t>(label)];
    shape.center = {(t[0] + rng.uniform(-0.03f, 0.03f)) * (w - 1), (t[1] + rng.uniform(-0.02f, 0.02f)) * (h - 1)};
    shape.radii = {std::max(0.8, t[2] * w * rng.uniform(0.85f, 1.15f)), std::max(0.8, t[3] * h * rng.uniform(0.85f, 1.15f))};
    shape.orientation = rng.uniform(-0.2f, 0.2f);
    shape.color = Eigen::Vector3f(rng.uniform(0.05f, 0.7f), rng.uniform(0.05f, 0.7f), rng.uniform(0.05f, 0.7f));

    auto& motion = layout.motion[static_cast<std::size_t>(label)];
    const double shift = cfg.scene.max_shift;
    const double turn = cfg.scene.max_rotation;
    const Eigen::Vector2d translation(rng.uniform(-1.0f, 1.0f) * shift, rng.uniform(-1.0f, 1.0f) * shift);
    const double rotation = rng.uniform(-1.0f, 1.0f) * turn;
    if (!cfg.scene.zero_motion) motion = {translation, rotation};
  }
  return layout;
}

Eigen::Vector2d source_position(const SceneLayout& layout, int label, double x, double y) {
  const auto& shape = layout.regions.at(static_cast<std::size_t>(label));
  const auto& motion = layout.motion.at(static_cast<std::size_t>(label));
  if (motion.rotation == 0.0 && motion.translation.isZero(0.0)) return {x, y};
  const Eigen::Vector2d d = Eigen::Vector2d(x, y) - shape.center - motion.translation;
  const double c = std::cos(-motion.rotation);
  const double s = std::sin(-motion.rotation);
  return shape.center + Eigen::Vector2d(c * d.x() - s * d.y(), s * d.x() + c * d.y());
}

Scene render_scene(const PipelineConfig& cfg, const SceneLayout& layout) {
  const Index h = cfg.height;
  const Index w = cfg.width;
  const int n = cfg.regions;
  if (static_cast<int>(layout.regions.size()) != n || static_cast<int>(layout.motion.size()) != n) {
    throw Error("render_scene: layout does not match the configured region count");
  }

  Scene scene;
  scene.seed = layout.seed;
  scene.source_seg = SegmentationMap(h, w, n);
  scene.target_seg = SegmentationMap(h, w, n);
  scene.flow = Tensor::chw(2, h, w);
  scene.visibility = VisibilityMap(h, w);

  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (int label = 1; label < n; ++label) {
        const auto& shape = layout.regions[static_cast<std::size_t>(label)];
        if (inside(shape, {double(x), double(y)})) scene.source_seg.set(y, x, label);
        if (inside(shape, source_position(layout, label, double(x), double(y)))) scene.target_seg.set(y, x, label);
      }
    }
  }

  Rng texture(layout.seed * 0x2545F4914F6CDD1DULL + 3);
  Tensor noise = Tensor::chw(3, h, w);
  for (float& v : noise.values()) v = layout.texture_amplitude * texture.normal();

  auto color_of = [&](int label) -> Eigen::Vector3f {
    return label == 0 ? layout.background : layout.regions[static_cast<std::size_t>(label)].color;
  };

  scene.source_image = Tensor::chw(3, h, w);
  scene.target_image = Tensor::chw(3, h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Eigen::Vector3f src = color_of(scene.source_seg(y, x));
      for (Index c = 0; c < 3; ++c) scene.source_image(c, y, x) = std::clamp(src[c] + noise(c, y, x), 0.0f, 1.0f);

      const int label = scene.target_seg(y, x);
      const Eigen::Vector3f dst = color_of(label);
      if (label == 0) {
        scene.visibility.set(y, x, scene.source_seg(y, x) != 0);
        for (Index c = 0; c < 3; ++c) scene.target_image(c, y, x) = std::clamp(dst[c] + noise(c, y, x), 0.0f, 1.0f);
        continue;
      }
      const Eigen::Vector2d q = source_position(layout, label, double(x), double(y));
      scene.flow(0, y, x) = static_cast<float>(q.x() - double(x));
      scene.flow(1, y, x) = static_cast<float>(q.y() - double(y));
      const Index qx = std::lround(q.x());
      const Index qy = std::lround(q.y());
      const bool seen = in_frame(qx, qy, w, h) && scene.source_seg(qy, qx) == label;
      scene.visibility.set(y, x, !seen);
      for (Index c = 0; c < 3; ++c) {
        const float grain = in_frame(qx, qy, w, h) ? noise(c, qy, qx) : 0.0f;
        scene.target_image(c, y, x) = std::clamp(dst[c] + grain, 0.0f, 1.0f);
      }
    }
  }

  if (cfg.scene.noisy_segmentation) {
    Rng rng(layout.seed * 0x94D049BB133111EBULL + 5);
    scene.predicted_seg = perturb_boundaries(scene.target_seg, cfg.scene.noise_rate, rng);
  } else {
    scene.predicted_seg = scene.target_seg;
  }
  return scene;
}

Scene synth_scene(const PipelineConfig& cfg, std::uint64_t seed) { return render_scene(cfg, random_layout(cfg, seed)); }

float bilinear_sample(const Tensor& features, Index channel, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const Index x0 = static_cast<Index>(fx);
  const Index y0 = static_cast<Index>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const Index h = features.height();
  const Index w = features.width();
  auto tap = [&](Index xx, Index yy) -> double {
    return in_frame(xx, yy, w, h) ? double(features(channel, yy, xx)) : 0.0;
  };
  const double top = (1.0 - ax) * tap(x0, y0) + ax * tap(x0 + 1, y0);
  const double bottom = (1.0 - ax) * tap(x0, y0 + 1) + ax * tap(x0 + 1, y0 + 1);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

Tensor warp_source(const Tensor& features, const Tensor& flow) {
  require_chw(features, "warp_source");
  require_chw(flow, "warp_source");
  if (flow.channels() != 2 || flow.height() != features.height() || flow.width() != features.width()) {
    throw Error("warp_source: flow must be 2 x H x W matching the features");
  }
  require_finite(flow, "warp_source");
  Tensor out(features.shape());
  for (Index y = 0; y < features.height(); ++y) {
    for (Index x = 0; x < features.width(); ++x) {
      const double sx = double(x) + double(flow(0, y, x));
      const double sy = double(y) + double(flow(1, y, x));
      for (Index c = 0; c < features.channels(); ++c) out(c, y, x) = bilinear_sample(features, c, sx, sy);
    }
  }
  return out;
}

}  // namespace glocal
