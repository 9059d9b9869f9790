#include "glocal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace glocal {

namespace {

template <typename F>
auto run_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Tensor matrix_to_tensor(const RowMatrixXf& m) {
  Tensor t({m.rows(), m.cols()});
  Eigen::Map<RowMatrixXf>(t.flat().data(), m.rows(), m.cols()) = m;
  return t;
}

// (H*W) x K position-major matrix <-> K x H x W tensor.
Tensor positions_to_tensor(const RowMatrixXf& m, Index height, Index width) {
  Tensor t = Tensor::chw(m.cols(), height, width);
  t.as_matrix() = m.transpose();
  return t;
}

RowMatrixXf tensor_to_positions(const Tensor& t) { return t.as_matrix().transpose(); }

ModulationField resample_field(const ModulationField& field, Index height, Index width, bool pool) {
  auto resample = [&](const RowMatrixXf& m) {
    const Tensor t = positions_to_tensor(m, field.height, field.width);
    return tensor_to_positions(pool ? adaptive_avg_pool(t, height, width) : resize_bilinear(t, height, width));
  };
  return {height, width, field.channels, field.kernel, resample(field.taps), resample(field.bias)};
}

}  // namespace

const Tensor& Intermediates::at(std::string_view name) const {
  for (const auto& [key, value] : entries_) {
    if (key == name) return value;
  }
  throw Error("no intermediate named \"" + std::string(name) + "\"");
}

bool Intermediates::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::vector<std::string> Intermediates::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

Tensor styles_to_tensor(const StyleCodeMatrix& styles) {
  return matrix_to_tensor(RowMatrixXf(styles.codes));
}

Tensor flags_to_tensor(const FlagImage& flags) {
  Tensor t = Tensor::chw(1, flags.rows(), flags.cols());
  for (Index i = 0; i < flags.size(); ++i) t[i] = flags.data()[i] ? 1.0f : 0.0f;
  return t;
}

std::vector<std::string> pose_transfer_stage_names() {
  return {"source_features",    "warped_features",     "layout_features",  "input_features", "style_codes",
          "reasoned_styles",    "occlusion_mask",      "conditioning",     "plain_conditioning",
          "gamma",              "beta",                "modulated_features", "correlation",  "filters",
          "biases",             "cost",                "transport_plan",   "aligned_filters", "aligned_biases",
          "generated_features", "image"};
}

Tensor adaptive_avg_pool(const Tensor& t, Index out_h, Index out_w) {
  require_chw(t, "adaptive_avg_pool");
  const Index h = t.height();
  const Index w = t.width();
  Tensor out = Tensor::chw(t.channels(), out_h, out_w);
  for (Index oy = 0; oy < out_h; ++oy) {
    const Index y0 = (oy * h) / out_h;
    const Index y1 = ((oy + 1) * h + out_h - 1) / out_h;
    for (Index ox = 0; ox < out_w; ++ox) {
      const Index x0 = (ox * w) / out_w;
      const Index x1 = ((ox + 1) * w + out_w - 1) / out_w;
      const double count = double((y1 - y0) * (x1 - x0));
      for (Index c = 0; c < t.channels(); ++c) {
        double acc = 0.0;
        for (Index y = y0; y < y1; ++y)
          for (Index x = x0; x < x1; ++x) acc += t(c, y, x);
        out(c, oy, ox) = static_cast<float>(acc / count);
      }
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& t, Index out_h, Index out_w) {
  require_chw(t, "resize_bilinear");
  const Index h = t.height();
  const Index w = t.width();
  Tensor out = Tensor::chw(t.channels(), out_h, out_w);
  for (Index oy = 0; oy < out_h; ++oy) {
    const double sy = std::clamp((oy + 0.5) * double(h) / double(out_h) - 0.5, 0.0, double(h - 1));
    const Index y0 = static_cast<Index>(std::floor(sy));
    const Index y1 = std::min(y0 + 1, h - 1);
    const double ay = sy - double(y0);
    for (Index ox = 0; ox < out_w; ++ox) {
      const double sx = std::clamp((ox + 0.5) * double(w) / double(out_w) - 0.5, 0.0, double(w - 1));
      const Index x0 = static_cast<Index>(std::floor(sx));
      const Index x1 = std::min(x0 + 1, w - 1);
      const double ax = sx - double(x0);
      for (Index c = 0; c < t.channels(); ++c) {
        const double top = (1 - ax) * t(c, y0, x0) + ax * t(c, y0, x1);
        const double bottom = (1 - ax) * t(c, y1, x0) + ax * t(c, y1, x1);
        out(c, oy, ox) = static_cast<float>((1 - ay) * top + ay * bottom);
      }
    }
  }
  return out;
}

Alignment align_modulation(const Tensor& source_features, const Tensor& generated_features,
                           const ModulationField& field, const PipelineConfig& cfg) {
  require_same_shape(source_features, generated_features, "align_modulation");
  const Index h = source_features.height();
  const Index w = source_features.width();
  const bool pooled = h * w > cfg.ot_max_positions;
  const Index gh = pooled ? std::min(h, cfg.ot_grid_height) : h;
  const Index gw = pooled ? std::min(w, cfg.ot_grid_width) : w;

  const Tensor src = pooled ? adaptive_avg_pool(source_features, gh, gw) : source_features;
  const Tensor gen = pooled ? adaptive_avg_pool(generated_features, gh, gw) : generated_features;
  const ModulationField grid_field = pooled ? resample_field(field, gh, gw, true) : field;

  Alignment out{field, cost_matrix<double>(gen, src, cfg.cost_eps), {}};
  out.plan = sinkhorn(out.cost, cfg.ot);
  out.field = warp_modulation(out.plan, grid_field, cfg.ot_row_normalize);
  if (pooled) out.field = resample_field(out.field, h, w, false);
  return out;
}

PoseTransferResult run_pose_transfer(const Scene& scene, const PipelineConfig& cfg) {
  return run_pose_transfer(scene, cfg, Networks::from_config(cfg));
}

PoseTransferResult run_pose_transfer(const Scene& scene, const PipelineConfig& cfg, const Networks& nets) {
  PoseTransferResult result;
  auto& st = result.stages;
  const SegmentationMap& target_layout = scene.predicted_seg;

  const Tensor source = run_stage("encode", [&] { return nets.encode(scene.source_image); });
  st.add("source_features", source);
  const Tensor warped = run_stage("warp_source", [&] { return warp_source(source, scene.flow); });
  st.add("warped_features", warped);
  const Tensor layout = run_stage("embed_layout", [&] { return nets.embed_layout(target_layout); });
  st.add("layout_features", layout);
  Tensor input = warped;
  input.flat() += layout.flat();
  st.add("input_features", input);

  result.styles = run_stage("region_style", [&] {
    return style_conv(region_avg_pool(source, scene.source_seg), nets.style_weight, nets.style_bias);
  });
  st.add("style_codes", styles_to_tensor(result.styles));
  result.reasoned = run_stage("graph_reason", [&] {
    const BodyGraph graph = build_body_graph(target_layout, cfg.graph_edges());
    return graph_reason(result.styles, graph, nets.graph);
  });
  st.add("reasoned_styles", styles_to_tensor(result.reasoned));
  result.occlusion = run_stage("occlusion_mask", [&] {
    return occlusion_mask(target_layout, scene.visibility, cfg.foreground());
  });
  st.add("occlusion_mask", flags_to_tensor(result.occlusion.flags()));
  result.conditioning = run_stage("merge_styles", [&] {
    return merge_styles(result.styles, result.reasoned, result.occlusion, target_layout);
  });
  st.add("conditioning", result.conditioning);
  result.plain_conditioning = run_stage("broadcast_styles", [&] { return broadcast_styles(result.styles, target_layout); });
  st.add("plain_conditioning", result.plain_conditioning);

  const auto [gamma, beta] = run_stage("affine_heads", [&] { return nets.affine_heads(result.conditioning); });
  st.add("gamma", gamma);
  st.add("beta", beta);
  const Tensor modulated = run_stage("modulate", [&] { return modulate(input, gamma, beta, cfg.epsilon); });
  st.add("modulated_features", modulated);

  const LocalCorrelationMap correlation =
      run_stage("self_correlation", [&] { return self_correlation(source, cfg.correlation()); });
  st.add("correlation", correlation.values);
  const ModulationField field = run_stage("predict_modulation", [&] {
    return predict_modulation(correlation, nets.filter_proj, nets.bias_proj, cfg.kernel);
  });
  st.add("filters", positions_to_tensor(field.taps, field.height, field.width));
  st.add("biases", positions_to_tensor(field.bias, field.height, field.width));

  Alignment alignment = run_stage("transport", [&] { return align_modulation(source, modulated, field, cfg); });
  st.add("cost", matrix_to_tensor(alignment.cost.values.cast<float>()));
  st.add("transport_plan", matrix_to_tensor(alignment.plan.matrix.cast<float>()));
  const ModulationField& aligned = alignment.field;
  st.add("aligned_filters", positions_to_tensor(aligned.taps, aligned.height, aligned.width));
  st.add("aligned_biases", positions_to_tensor(aligned.bias, aligned.height, aligned.width));

  const Tensor generated = run_stage("loc_conv", [&] { return loc_conv(modulated, aligned, cfg.loc_conv()); });
  st.add("generated_features", generated);
  result.plan = std::move(alignment.plan);
  result.image = run_stage("decode", [&] { return nets.decode(generated); });
  st.add("image", result.image);

  for (const auto& [name, value] : st.entries()) {
    if (!value.all_finite()) throw StageError(name, "non-finite values produced");
  }
  return result;
}

PixelMask semantic_mask(const SegmentationMap& seg, const std::vector<int>& labels) {
  PixelMask mask(seg.height(), seg.width());
  for (Index y = 0; y < seg.height(); ++y) {
    for (Index x = 0; x < seg.width(); ++x) {
      mask.set(y, x, std::find(labels.begin(), labels.end(), seg(y, x)) != labels.end());
    }
  }
  return mask;
}

InpaintResult run_inpainting(const Tensor& image, const SegmentationMap& seg, const PixelMask& mask,
                             const PipelineConfig& cfg) {
  return run_inpainting(image, seg, mask, cfg, Networks::from_config(cfg));
}

InpaintResult run_inpainting(const Tensor& image, const SegmentationMap& seg, const PixelMask& mask,
                             const PipelineConfig& cfg, const Networks& nets) {
  require_chw(image, "run_inpainting");
  if (image.channels() != 3 || image.height() != seg.height() || image.width() != seg.width()) {
    throw Error("run_inpainting: image must be 3 x H x W matching the segmentation");
  }
  if (mask.height() != seg.height() || mask.width() != seg.width()) {
    throw Error("run_inpainting: mask extent does not match the image");
  }
  if (seg.num_labels() != cfg.regions) throw Error("run_inpainting: segmentation label count differs from config");

  InpaintResult result;
  Tensor corrupted = image;
  for (Index p = 0; p < seg.labels().size(); ++p) {
    if (!mask.at(p)) continue;
    for (Index c = 0; c < 3; ++c) corrupted[c * image.plane_size() + p] = 0.0f;
  }

  const Tensor features = run_stage("encode", [&] { return nets.encode(corrupted); });
  result.styles = run_stage("region_style", [&] {
    return style_conv(region_avg_pool(features, seg, &mask), nets.style_weight, nets.style_bias);
  });
  StyleCodeMatrix reasoned = run_stage("graph_reason", [&] {
    return graph_reason(result.styles, build_body_graph(seg, cfg.graph_edges()), nets.graph);
  });

  // Regions present in the layout but without a single surviving pixel.
  const auto counts = seg.histogram();
  std::vector<bool> lost(counts.size(), false);
  for (std::size_t n = 0; n < counts.size(); ++n) lost[n] = counts[n] > 0 && !result.styles.present[n];

  if (std::any_of(lost.begin(), lost.end(), [](bool b) { return b; })) {
    Eigen::RowVectorXf mean = Eigen::RowVectorXf::Zero(result.styles.channels());
    const Index survivors = result.styles.present_count();
    for (Index n = 0; n < result.styles.regions(); ++n) {
      if (result.styles.present[static_cast<std::size_t>(n)]) mean += result.styles.codes.row(n);
    }
    if (survivors > 0) mean /= static_cast<float>(survivors);
    for (std::size_t n = 0; n < lost.size(); ++n) {
      if (!lost[n] || reasoned.present[n]) continue;
      reasoned.codes.row(static_cast<Index>(n)) = mean;
      reasoned.present[n] = survivors > 0;
      result.warnings.push_back("region " + std::to_string(n) +
                                (survivors > 0 ? " has no surviving graph neighbour; filled with the mean surviving style"
                                               : " cannot be filled: no region survives the mask"));
    }
  }
  result.reasoned = StyleCodeMatrix(std::move(reasoned.codes), std::move(reasoned.present));

  result.occlusion = OcclusionMask(seg.height(), seg.width());
  for (Index y = 0; y < seg.height(); ++y) {
    for (Index x = 0; x < seg.width(); ++x) {
      result.occlusion.set(y, x, mask(y, x) && lost[static_cast<std::size_t>(seg(y, x))]);
    }
  }
  result.conditioning = run_stage("merge_styles", [&] {
    return merge_styles(result.styles, result.reasoned, result.occlusion, seg);
  });

  Tensor input = features;
  input.flat() += nets.embed_layout(seg).flat();
  const auto [gamma, beta] = run_stage("affine_heads", [&] { return nets.affine_heads(result.conditioning); });
  const Tensor modulated = run_stage("modulate", [&] { return modulate(input, gamma, beta, cfg.epsilon); });

  // Source and target share the same geometry, so the field needs no alignment.
  const ModulationField field = run_stage("local_structure", [&] {
    return predict_modulation(self_correlation(features, cfg.correlation()), nets.filter_proj, nets.bias_proj,
                              cfg.kernel);
  });
  const Tensor generated = run_stage("loc_conv", [&] { return loc_conv(modulated, field, cfg.loc_conv()); });
  result.decoded = run_stage("decode", [&] { return nets.decode(generated); });

  result.image = image;
  for (Index p = 0; p < seg.labels().size(); ++p) {
    if (!mask.at(p)) continue;
    for (Index c = 0; c < 3; ++c) result.image[c * image.plane_size() + p] = result.decoded[c * image.plane_size() + p];
  }
  return result;
}

}  // namespace glocal
