#include "glocal/networks.hpp"

#include "glocal/random.hpp"

#include <cmath>
#include <functional>

namespace glocal {

namespace {

Tensor to_tensor(const MatrixXf& m) {
  Tensor t({m.rows(), m.cols()});
  Eigen::Map<RowMatrixXf>(t.flat().data(), m.rows(), m.cols()) = m;
  return t;
}

MatrixXf to_matrix(const Tensor& t) {
  return Eigen::Map<const RowMatrixXf>(t.flat().data(), t.extent(0), t.extent(1));
}

// Visits every parameter as a (name, tensor view, writer) triple.
struct Parameter {
  std::string name;
  Tensor value;
  std::function<void(const Tensor&)> assign;
};

std::vector<Parameter> parameters(Networks& net) {
  std::vector<Parameter> out;
  auto conv = [&](const std::string& name, Conv2d& c) {
    out.push_back({name + ".weight", c.weight, [&c](const Tensor& t) { c.weight = t; }});
    out.push_back({name + ".bias", Tensor({c.bias.size()}, c.bias), [&c](const Tensor& t) { c.bias = t.flat(); }});
  };
  auto matrix = [&](const std::string& name, MatrixXf& m) {
    out.push_back({name, to_tensor(m), [&m](const Tensor& t) { m = to_matrix(t); }});
  };
  conv("encoder_in", net.encoder_in);
  conv("encoder_out", net.encoder_out);
  conv("pose_embed", net.pose_embed);
  matrix("style_weight", net.style_weight);
  out.push_back({"style_bias", Tensor({net.style_bias.size()}, net.style_bias),
                 [&net](const Tensor& t) { net.style_bias = t.flat(); }});
  matrix("graph_w0", net.graph.w[0]);
  matrix("graph_w1", net.graph.w[1]);
  matrix("graph_w2", net.graph.w[2]);
  conv("gamma_head", net.gamma_head);
  conv("beta_head", net.beta_head);
  matrix("filter_proj", net.filter_proj);
  matrix("bias_proj", net.bias_proj);
  conv("decoder_mid", net.decoder_mid);
  conv("decoder_out", net.decoder_out);
  return out;
}

}  // namespace

Tensor one_hot(const SegmentationMap& seg) {
  Tensor t = Tensor::chw(seg.num_labels(), seg.height(), seg.width());
  for (Index y = 0; y < seg.height(); ++y)
    for (Index x = 0; x < seg.width(); ++x) t(seg(y, x), y, x) = 1.0f;
  return t;
}

Networks Networks::seeded(const PipelineConfig& cfg) {
  const Index c = cfg.channels;
  const Index k2 = Index(cfg.kernel) * cfg.kernel;
  const Index offsets = Index(2 * cfg.neighborhood_radius + 1) * (2 * cfg.neighborhood_radius + 1);
  const std::uint64_t s = cfg.network_seed * 1000;

  Networks net;
  net.encoder_in = Conv2d::seeded(3, c, 3, 1, s + 1);
  net.encoder_out = Conv2d::seeded(c, c, 3, 1, s + 2, 0.5f);
  net.pose_embed = Conv2d::seeded(cfg.regions, c, 1, 1, s + 3, 0.5f);

  Rng rng(s + 4);
  const float style_bound = 1.0f / std::sqrt(static_cast<float>(c));
  net.style_weight = MatrixXf::Identity(c, c) + rng.uniform_matrix(c, c, -style_bound, style_bound) * 0.5f;
  net.style_bias = VectorXf::Zero(c);
  for (auto& w : net.graph.w) w = MatrixXf::Identity(c, c) * 0.5f + rng.uniform_matrix(c, c, -style_bound, style_bound) * 0.25f;

  net.gamma_head = Conv2d::seeded(c, c, 1, 1, s + 5, 0.25f);
  net.beta_head = Conv2d::seeded(c, c, 1, 1, s + 6, 0.5f);

  Rng proj(s + 7);
  const float proj_bound = 1.0f / std::sqrt(static_cast<float>(offsets));
  net.filter_proj = proj.uniform_matrix(c * k2, offsets, -proj_bound, proj_bound) / static_cast<float>(k2);
  net.bias_proj = proj.uniform_matrix(c, offsets, -proj_bound, proj_bound) * 0.5f;

  net.decoder_mid = Conv2d::seeded(c, c, 3, 1, s + 8, 0.5f);
  net.decoder_out = Conv2d::seeded(c, 3, 1, 1, s + 9, 0.5f);
  return net;
}

Networks Networks::from_config(const PipelineConfig& cfg) {
  Networks net = seeded(cfg);
  if (!cfg.weights_dir.empty()) net.load_overrides(cfg.weights_dir);
  return net;
}

std::vector<std::string> Networks::load_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("weights directory not found: " + dir.string());
  std::vector<std::string> loaded;
  for (auto& p : parameters(*this)) {
    const auto file = dir / (p.name + ".glt");
    if (!std::filesystem::exists(file)) continue;
    const Tensor t = load_tensor(file);
    if (t.shape() != p.value.shape()) {
      throw Error("weights " + file.string() + " has shape " + shape_string(t.shape()) + ", expected " +
                  shape_string(p.value.shape()));
    }
    p.assign(t);
    loaded.push_back(p.name);
  }
  return loaded;
}

void Networks::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  Networks copy = *this;
  for (const auto& p : parameters(copy)) save_tensor(dir / (p.name + ".glt"), p.value);
}

std::vector<std::string> Networks::parameter_names() const {
  Networks copy = *this;
  std::vector<std::string> names;
  for (const auto& p : parameters(copy)) names.push_back(p.name);
  return names;
}

Tensor Networks::encode(const Tensor& image) const { return encoder_out(relu(encoder_in(image))); }

Tensor Networks::embed_layout(const SegmentationMap& seg) const { return pose_embed(one_hot(seg)); }

std::pair<Tensor, Tensor> Networks::affine_heads(const Tensor& conditioning) const {
  Tensor gamma = gamma_head(conditioning);
  gamma.flat().array() += 1.0f;
  return {std::move(gamma), beta_head(conditioning)};
}

Tensor Networks::decode(const Tensor& features) const { return sigmoid(decoder_out(relu(decoder_mid(features)))); }

}  // namespace glocal
