#pragma once

#include "glocal/graph_reasoning.hpp"
#include "glocal/objectives.hpp"
#include "glocal/transport.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace glocal {

struct SceneOptions {
  /// Largest per-region translation in pixels.
  double max_shift = 3.0;
  /// Largest per-region rotation in radians.
  double max_rotation = 0.15;
  bool zero_motion = false;
  /// Perturb boundary labels of the predicted target segmentation.
  bool noisy_segmentation = false;
  double noise_rate = 0.3;
};

struct PipelineConfig {
  Index height = 32;
  Index width = 24;
  int regions = 8;
  /// Feature channels of the encoder stack.
  Index channels = 16;

  int patch_radius = 1;         // r
  int neighborhood_radius = 2;  // d
  int kernel = 3;               // k
  float epsilon = 1e-5f;
  bool bias_per_tap = false;
  bool normalize_correlation = true;

  std::vector<int> foreground_labels;  // empty: every label except 0
  EdgeList edges;                      // empty: default for the region count

  SinkhornOptions ot;
  bool ot_row_normalize = true;
  /// Above this many positions transport runs on a pooled grid.
  Index ot_max_positions = 256;
  Index ot_grid_height = 16;
  Index ot_grid_width = 12;
  double cost_eps = 1e-8;

  double eta = 2.0;
  LossWeights loss;
  std::uint64_t perceptual_seed = 19;
  std::vector<std::size_t> perceptual_layers{0, 1, 2};

  std::uint64_t network_seed = 1234;
  SceneOptions scene;
  /// Optional directory of GLT1 files overriding seeded network parameters.
  std::string weights_dir;
  /// Treat selftest warnings as failures.
  bool selftest_strict = false;

  LabelSet foreground() const;
  EdgeList graph_edges() const;
  CorrelationOptions correlation() const { return {patch_radius, neighborhood_radius, normalize_correlation}; }
  LocConvOptions loc_conv() const { return {epsilon, bias_per_tap}; }

  /// Throws on any inconsistent value.
  void validate() const;
};

/// Parses a config document. Nested objects and dotted keys ("ot.tol") are
/// equivalent; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace glocal
