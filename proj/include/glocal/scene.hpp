#pragma once

#include "glocal/config.hpp"
#include "glocal/tensor.hpp"

#include <cstdint>
#include <vector>

namespace glocal {

/// Synthetic pose-transfer instance.
///
/// The flow is 2 x H x W with channel 0 = dx and channel 1 = dy: target pixel
/// p takes its appearance from source position p + flow(p).
struct Scene {
  Tensor source_image;  // 3 x H x W in [0, 1]
  Tensor target_image;  // ground truth, 3 x H x W in [0, 1]
  SegmentationMap source_seg;
  SegmentationMap target_seg;     // ground truth S_t
  SegmentationMap predicted_seg;  // S_g
  Tensor flow;
  VisibilityMap visibility;
  std::uint64_t seed = 0;
};

/// Elliptic region in source coordinates.
struct RegionShape {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // (x, y)
  Eigen::Vector2d radii = Eigen::Vector2d::Ones();
  double orientation = 0.0;
  Eigen::Vector3f color = Eigen::Vector3f::Zero();
};

/// Rigid motion of a region about its own center.
struct RegionMotion {
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  double rotation = 0.0;
};

/// Everything the renderer needs. Index = label; entry 0 is the background and
/// is never painted as an ellipse. Regions are painted in label order.
struct SceneLayout {
  std::vector<RegionShape> regions;
  std::vector<RegionMotion> motion;
  Eigen::Vector3f background = Eigen::Vector3f::Constant(0.9f);
  float texture_amplitude = 0.05f;
  std::uint64_t seed = 0;
};

SceneLayout random_layout(const PipelineConfig& cfg, std::uint64_t seed);
Scene render_scene(const PipelineConfig& cfg, const SceneLayout& layout);
/// render_scene(cfg, random_layout(cfg, seed)).
Scene synth_scene(const PipelineConfig& cfg, std::uint64_t seed);

/// Source position for target pixel (x, y) under region `label`'s motion.
Eigen::Vector2d source_position(const SceneLayout& layout, int label, double x, double y);

/// output(p) = bilinear sample of `features` at p + flow(p); taps outside
/// the frame read as zero.
Tensor warp_source(const Tensor& features, const Tensor& flow);

/// Bilinear sample of one channel at (x, y) with zero outside the frame.
float bilinear_sample(const Tensor& features, Index channel, double x, double y);

}  // namespace glocal
