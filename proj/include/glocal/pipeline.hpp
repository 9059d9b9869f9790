#pragma once

#include "glocal/config.hpp"
#include "glocal/graph_reasoning.hpp"
#include "glocal/local_structure.hpp"
#include "glocal/networks.hpp"
#include "glocal/region_style.hpp"
#include "glocal/scene.hpp"
#include "glocal/transport.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glocal {

/// Operator failure tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Named tensors in execution order.
class Intermediates {
 public:
  void add(std::string name, Tensor value) { entries_.emplace_back(std::move(name), std::move(value)); }
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

Tensor styles_to_tensor(const StyleCodeMatrix& styles);
Tensor flags_to_tensor(const FlagImage& flags);

struct PoseTransferResult {
  Tensor image;  // I_g, 3 x H x W in [0, 1]
  StyleCodeMatrix styles;    // ST after the per-style convolution
  StyleCodeMatrix reasoned;  // ST_oc
  OcclusionMask occlusion;
  Tensor conditioning;        // merged style map
  Tensor plain_conditioning;  // broadcast of ST without reasoning
  TransportPlan plan;         // rows: generated positions, columns: source positions
  Intermediates stages;
};

/// Stage names produced by run_pose_transfer, in order.
std::vector<std::string> pose_transfer_stage_names();

PoseTransferResult run_pose_transfer(const Scene& scene, const PipelineConfig& cfg, const Networks& nets);
PoseTransferResult run_pose_transfer(const Scene& scene, const PipelineConfig& cfg);

/// Adaptive average pooling of a C x H x W tensor to C x out_h x out_w.
Tensor adaptive_avg_pool(const Tensor& t, Index out_h, Index out_w);
/// Bilinear resize with half-pixel centres and edge clamping.
Tensor resize_bilinear(const Tensor& t, Index out_h, Index out_w);

/// Aligns the source modulation field to the generated layout by transport
/// between generated features (rows) and source features (columns); runs on a
/// pooled grid when the position count exceeds cfg.ot_max_positions.
struct Alignment {
  ModulationField field;  // at full resolution
  CostMatrix cost;        // on the solve grid
  TransportPlan plan;
};
Alignment align_modulation(const Tensor& source_features, const Tensor& generated_features,
                           const ModulationField& field, const PipelineConfig& cfg);

struct InpaintResult {
  Tensor image;
  Tensor decoded;
  StyleCodeMatrix styles;    // pooled over surviving pixels, after style convolution
  StyleCodeMatrix reasoned;  // graph reasoning output with fallback fill
  OcclusionMask occlusion;
  Tensor conditioning;
  std::vector<std::string> warnings;
};

/// Pixels whose label is in `labels`.
PixelMask semantic_mask(const SegmentationMap& seg, const std::vector<int>& labels);

/// Fills masked pixels. Styles come from unmasked pixels only. Masked pixels
/// of a region with surviving pixels keep that region's style; regions with
/// no survivors take the graph-reasoned style (or the mean surviving style,
/// with a warning, when no graph neighbour survives). Unmasked output pixels
/// are copied from the input.
InpaintResult run_inpainting(const Tensor& image, const SegmentationMap& seg, const PixelMask& mask,
                             const PipelineConfig& cfg, const Networks& nets);
InpaintResult run_inpainting(const Tensor& image, const SegmentationMap& seg, const PixelMask& mask,
                             const PipelineConfig& cfg);

}  // namespace glocal
