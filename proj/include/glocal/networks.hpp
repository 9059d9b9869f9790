#pragma once

#include "glocal/config.hpp"
#include "glocal/graph_reasoning.hpp"
#include "glocal/layers.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace glocal {

/// Fixed parameters of every learned stage around the operators. All of them
/// are drawn from the configured seed; any of them may be replaced by a GLT1
/// file named "<parameter>.glt" in the weights directory.
struct Networks {
  Conv2d encoder_in;    // 3 -> C, 3x3
  Conv2d encoder_out;   // C -> C, 3x3
  Conv2d pose_embed;    // N -> C, 1x1 on the one-hot target layout
  MatrixXf style_weight;  // C x C
  VectorXf style_bias;    // C
  SubsetWeights graph;
  Conv2d gamma_head;    // C -> C, 1x1
  Conv2d beta_head;     // C -> C, 1x1
  MatrixXf filter_proj;  // (C*k*k) x (2d+1)^2
  MatrixXf bias_proj;    // C x (2d+1)^2
  Conv2d decoder_mid;   // C -> C, 3x3
  Conv2d decoder_out;   // C -> 3, 1x1

  static Networks seeded(const PipelineConfig& cfg);
  /// seeded(cfg) followed by load_overrides(cfg.weights_dir) when set.
  static Networks from_config(const PipelineConfig& cfg);

  /// Replaces parameters with files found in `dir`; returns the names loaded.
  std::vector<std::string> load_overrides(const std::filesystem::path& dir);
  /// Writes every parameter as "<name>.glt".
  void save(const std::filesystem::path& dir) const;
  std::vector<std::string> parameter_names() const;

  Tensor encode(const Tensor& image) const;
  Tensor embed_layout(const SegmentationMap& seg) const;
  /// gamma = 1 + head(cond), beta = head(cond).
  std::pair<Tensor, Tensor> affine_heads(const Tensor& conditioning) const;
  /// Output in [0, 1].
  Tensor decode(const Tensor& features) const;
};

/// N x H x W indicator planes of a segmentation.
Tensor one_hot(const SegmentationMap& seg);

}  // namespace glocal
