#include "glocal/config.hpp"

#include <array>
#include <fstream>
#include <map>
#include <set>

namespace glocal {

namespace {

using json = nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "height", "width", "regions", "channels", "r", "d", "k", "epsilon", "bias_per_tap", "normalize_correlation",
      "foreground_labels", "graph.nodes", "graph.edges", "ot.eps_reg", "ot.tau", "ot.mode", "ot.max_iters", "ot.tol",
      "ot.row_normalize", "ot.max_positions", "ot.grid_height", "ot.grid_width", "ot.cost_eps", "loss.eta",
      "loss.a_Sg", "loss.a_L1", "loss.a_perc", "loss.a_adv", "perc.seed", "perc.layers", "seeds.network",
      "scene.max_shift", "scene.max_rotation", "scene.zero_motion", "scene.noisy_segmentation", "scene.noise_rate",
      "weights_dir", "selftest.strict"};
  return keys;
}

void flatten(const json& node, const std::string& prefix, std::map<std::string, json>& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else {
      if (out.count(name)) throw Error("config key given twice: " + name);
      out[name] = value;
    }
  }
}

template <typename T>
void read(const std::map<std::string, json>& flat, const std::string& key, T& target) {
  const auto it = flat.find(key);
  if (it == flat.end()) return;
  try {
    target = it->second.get<T>();
  } catch (const json::exception& e) {
    throw Error("config key " + key + ": " + e.what());
  }
}

}  // namespace

LabelSet PipelineConfig::foreground() const {
  return foreground_labels.empty() ? LabelSet::all_but_background(regions) : LabelSet(foreground_labels);
}

EdgeList PipelineConfig::graph_edges() const {
  if (!edges.empty()) return edges;
  if (regions == 8) return default_body_edges();
  EdgeList chain;
  for (int n = 1; n + 1 < regions; ++n) chain.emplace_back(n, n + 1);
  return chain;
}

void PipelineConfig::validate() const {
  if (regions < 2) throw Error("config: regions must be at least 2");
  if (channels < 1) throw Error("config: channels must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw Error("config: k must be odd and positive");
  if (height < kernel || width < kernel) throw Error("config: height and width must be at least k");
  if (patch_radius < 0 || neighborhood_radius < 0) throw Error("config: r and d must be non-negative");
  if (!(epsilon >= 0.0f)) throw Error("config: epsilon must be non-negative");
  for (int l : foreground_labels) {
    if (l < 0 || l >= regions) throw Error("config: foreground label " + std::to_string(l) + " out of range");
  }
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= regions || b >= regions) throw Error("config: graph edge references a label >= regions");
  }
  if (!(ot.eps_reg > 0.0) || !(ot.tau > 0.0) || ot.max_iters < 0 || !(ot.tol > 0.0)) {
    throw Error("config: ot.eps_reg, ot.tau, ot.tol must be positive and ot.max_iters non-negative");
  }
  if (ot_grid_height < 1 || ot_grid_width < 1 || ot_max_positions < 1) throw Error("config: bad transport grid");
  if (!(eta >= 0.0)) throw Error("config: loss.eta must be non-negative");
  if (loss.segmentation < 0 || loss.l1 < 0 || loss.perceptual < 0 || loss.adversarial < 0) {
    throw Error("config: loss weights must be non-negative");
  }
  if (scene.max_shift < 0 || scene.max_rotation < 0 || scene.noise_rate < 0 || scene.noise_rate > 1) {
    throw Error("config: bad scene motion or noise settings");
  }
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("config: top level must be a JSON object");
  std::map<std::string, json> flat;
  flatten(doc, "", flat);
  for (const auto& [key, value] : flat) {
    if (!known_keys().count(key)) throw Error("config: unknown key \"" + key + "\"");
  }

  PipelineConfig cfg;
  read(flat, "height", cfg.height);
  read(flat, "width", cfg.width);
  read(flat, "regions", cfg.regions);
  read(flat, "channels", cfg.channels);
  read(flat, "r", cfg.patch_radius);
  read(flat, "d", cfg.neighborhood_radius);
  read(flat, "k", cfg.kernel);
  read(flat, "epsilon", cfg.epsilon);
  read(flat, "bias_per_tap", cfg.bias_per_tap);
  read(flat, "normalize_correlation", cfg.normalize_correlation);
  read(flat, "foreground_labels", cfg.foreground_labels);

  int nodes = cfg.regions;
  read(flat, "graph.nodes", nodes);
  if (nodes != cfg.regions) throw Error("config: graph.nodes must equal regions");
  std::vector<std::array<int, 2>> edges;
  read(flat, "graph.edges", edges);
  for (auto [a, b] : edges) cfg.edges.emplace_back(a, b);

  read(flat, "ot.eps_reg", cfg.ot.eps_reg);
  read(flat, "ot.tau", cfg.ot.tau);
  std::string mode = "balanced";
  read(flat, "ot.mode", mode);
  if (mode == "balanced") {
    cfg.ot.mode = TransportMode::Balanced;
  } else if (mode == "unbalanced") {
    cfg.ot.mode = TransportMode::Unbalanced;
  } else {
    throw Error("config: ot.mode must be \"balanced\" or \"unbalanced\"");
  }
  read(flat, "ot.max_iters", cfg.ot.max_iters);
  read(flat, "ot.tol", cfg.ot.tol);
  read(flat, "ot.row_normalize", cfg.ot_row_normalize);
  read(flat, "ot.max_positions", cfg.ot_max_positions);
  read(flat, "ot.grid_height", cfg.ot_grid_height);
  read(flat, "ot.grid_width", cfg.ot_grid_width);
  read(flat, "ot.cost_eps", cfg.cost_eps);

  read(flat, "loss.eta", cfg.eta);
  read(flat, "loss.a_Sg", cfg.loss.segmentation);
  read(flat, "loss.a_L1", cfg.loss.l1);
  read(flat, "loss.a_perc", cfg.loss.perceptual);
  read(flat, "loss.a_adv", cfg.loss.adversarial);
  read(flat, "perc.seed", cfg.perceptual_seed);
  read(flat, "perc.layers", cfg.perceptual_layers);
  read(flat, "seeds.network", cfg.network_seed);

  read(flat, "scene.max_shift", cfg.scene.max_shift);
  read(flat, "scene.max_rotation", cfg.scene.max_rotation);
  read(flat, "scene.zero_motion", cfg.scene.zero_motion);
  read(flat, "scene.noisy_segmentation", cfg.scene.noisy_segmentation);
  read(flat, "scene.noise_rate", cfg.scene.noise_rate);
  read(flat, "weights_dir", cfg.weights_dir);
  read(flat, "selftest.strict", cfg.selftest_strict);

  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  json edges = json::array();
  for (auto [a, b] : cfg.graph_edges()) edges.push_back({a, b});
  return {
      {"height", cfg.height},
      {"width", cfg.width},
      {"regions", cfg.regions},
      {"channels", cfg.channels},
      {"r", cfg.patch_radius},
      {"d", cfg.neighborhood_radius},
      {"k", cfg.kernel},
      {"epsilon", cfg.epsilon},
      {"bias_per_tap", cfg.bias_per_tap},
      {"normalize_correlation", cfg.normalize_correlation},
      {"foreground_labels", cfg.foreground().labels()},
      {"graph", {{"nodes", cfg.regions}, {"edges", edges}}},
      {"ot",
       {{"eps_reg", cfg.ot.eps_reg},
        {"tau", cfg.ot.tau},
        {"mode", cfg.ot.mode == TransportMode::Balanced ? "balanced" : "unbalanced"},
        {"max_iters", cfg.ot.max_iters},
        {"tol", cfg.ot.tol},
        {"row_normalize", cfg.ot_row_normalize},
        {"max_positions", cfg.ot_max_positions},
        {"grid_height", cfg.ot_grid_height},
        {"grid_width", cfg.ot_grid_width},
        {"cost_eps", cfg.cost_eps}}},
      {"loss",
       {{"eta", cfg.eta},
        {"a_Sg", cfg.loss.segmentation},
        {"a_L1", cfg.loss.l1},
        {"a_perc", cfg.loss.perceptual},
        {"a_adv", cfg.loss.adversarial}}},
      {"perc", {{"seed", cfg.perceptual_seed}, {"layers", cfg.perceptual_layers}}},
      {"seeds", {{"network", cfg.network_seed}}},
      {"scene",
       {{"max_shift", cfg.scene.max_shift},
        {"max_rotation", cfg.scene.max_rotation},
        {"zero_motion", cfg.scene.zero_motion},
        {"noisy_segmentation", cfg.scene.noisy_segmentation},
        {"noise_rate", cfg.scene.noise_rate}}},
      {"weights_dir", cfg.weights_dir},
      {"selftest", {{"strict", cfg.selftest_strict}}},
  };
}

}  // namespace glocal
