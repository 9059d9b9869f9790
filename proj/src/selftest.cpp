#include "glocal/selftest.hpp"

#include "glocal/graph_reasoning.hpp"
#include "glocal/local_structure.hpp"
#include "glocal/objectives.hpp"
#include "glocal/pipeline.hpp"
#include "glocal/random.hpp"
#include "glocal/region_style.hpp"
#include "glocal/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace glocal {

namespace {

class Checks {
 public:
  explicit Checks(SelftestReport& report) : report_(report) {}

  void bound(const std::string& name, double measured, double threshold, std::string detail = {}) {
    const bool ok = std::isfinite(measured) && measured <= threshold;
    report_.checks.push_back({name, ok ? CheckStatus::Pass : CheckStatus::Fail, measured, threshold, std::move(detail)});
  }

  void add(CheckResult r) { report_.checks.push_back(std::move(r)); }

  // Any exception inside a check is a failure of that check only.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report_.checks.push_back({name, CheckStatus::Fail, 0.0, 0.0, e.what()});
    }
  }

 private:
  SelftestReport& report_;
};

SegmentationMap random_segmentation(Rng& rng, Index h, Index w, int labels) {
  SegmentationMap seg(h, w, labels);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) seg.set(y, x, static_cast<int>(rng.below(static_cast<std::uint32_t>(labels))));
  return seg;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  return (a.flat().cast<double>() - b.flat().cast<double>()).cwiseAbs().maxCoeff();
}

void tensor_checks(Checks& checks, Rng& rng) {
  checks.guarded("tensor.roundtrip", [&] {
    double mismatches = 0;
    for (Index rank = 1; rank <= 4; ++rank) {
      Shape shape;
      for (Index i = 0; i < rank; ++i) shape.push_back(1 + rng.below(4));
      const Tensor t = rng.uniform_tensor(shape);
      if (!decode_tensor(encode_tensor(t)).bit_equal(t)) ++mismatches;
    }
    checks.bound("tensor.roundtrip", mismatches, 0.0);
  });
  checks.guarded("tensor.channel_normalize", [&] {
    const Tensor t = rng.uniform_tensor({3, 4, 4}, -2.0f, 3.0f);
    const Tensor n = channel_normalize(t).values;
    double worst = 0.0;
    for (Index c = 0; c < 3; ++c) {
      const auto row = n.as_matrix().row(c).cast<double>();
      const double mean = row.mean();
      const double sd = std::sqrt((row.array() - mean).square().mean());
      worst = std::max({worst, std::abs(mean) * 100.0, std::abs(sd - 1.0)});
    }
    checks.bound("tensor.channel_normalize", worst, 1e-4, "mean (x100) and std deviation from 0/1");
  });
}

void region_checks(Checks& checks, Rng& rng) {
  checks.guarded("region.pool_broadcast", [&] {
    const SegmentationMap seg = random_segmentation(rng, 6, 5, 4);
    const MatrixXf rows = rng.uniform_matrix(4, 3);
    std::vector<bool> present(4);
    const auto hist = seg.histogram();
    MatrixXf codes = rows;
    for (Index n = 0; n < 4; ++n) {
      present[static_cast<std::size_t>(n)] = hist[static_cast<std::size_t>(n)] > 0;
      if (!present[static_cast<std::size_t>(n)]) codes.row(n).setZero();
    }
    const Tensor f = broadcast_styles(StyleCodeMatrix(codes, present), seg);
    checks.bound("region.pool_broadcast", max_abs_diff(broadcast_styles(region_avg_pool(f, seg), seg), f), 1e-6);
  });
  checks.guarded("region.occlusion_subset", [&] {
    const SegmentationMap seg = random_segmentation(rng, 6, 5, 4);
    VisibilityMap vis(6, 5);
    for (Index y = 0; y < 6; ++y)
      for (Index x = 0; x < 5; ++x) vis.set(y, x, rng.below(2) == 1);
    const OcclusionMask m = occlusion_mask(seg, vis, LabelSet::all_but_background(4));
    double violations = 0;
    for (Index i = 0; i < m.flags().size(); ++i) violations += m.at(i) && !vis.at(i);
    checks.bound("region.occlusion_subset", violations, 0.0);
  });
  checks.guarded("region.modulate_affine", [&] {
    const Tensor f = rng.uniform_tensor({2, 4, 4});
    const Tensor g = rng.uniform_tensor({2, 4, 4});
    const Tensor b = rng.uniform_tensor({2, 4, 4});
    const float a = 1.7f;
    Tensor ag = g, ab = b;
    ag.flat() *= a;
    ab.flat() *= a;
    Tensor scaled = modulate(f, g, b);
    scaled.flat() *= a;
    checks.bound("region.modulate_affine", max_abs_diff(modulate(f, ag, ab), scaled), 1e-5);
  });
}

void graph_checks(Checks& checks, Rng& rng, const PipelineConfig& cfg) {
  const int n = cfg.regions;
  const Index c = 4;
  Eigen::MatrixX2d anchors(n, 2);
  for (int i = 0; i < n; ++i) anchors.row(i) << rng.uniform(0.0f, 20.0f), rng.uniform(0.0f, 20.0f);
  const BodyGraph graph(n, cfg.graph_edges(), anchors, std::vector<bool>(static_cast<std::size_t>(n), true));
  SubsetWeights w{{rng.uniform_matrix(c, c), rng.uniform_matrix(c, c), rng.uniform_matrix(c, c)}};
  const std::vector<bool> all(static_cast<std::size_t>(n), true);

  checks.guarded("graph.linearity", [&] {
    const StyleCodeMatrix a(rng.uniform_matrix(n, c), all);
    const StyleCodeMatrix b(rng.uniform_matrix(n, c), all);
    const StyleCodeMatrix mix(2.0f * a.codes - 0.5f * b.codes, all);
    const MatrixXf lhs = graph_reason(mix, graph, w).codes;
    const MatrixXf rhs = 2.0f * graph_reason(a, graph, w).codes - 0.5f * graph_reason(b, graph, w).codes;
    checks.bound("graph.linearity", (lhs - rhs).cwiseAbs().maxCoeff(), 1e-5);
  });
  checks.guarded("graph.subset_normalization", [&] {
    const Eigen::RowVectorXf s = rng.uniform_matrix(1, c);
    const StyleCodeMatrix equal(s.replicate(n, 1), all);
    const MatrixXf out = graph_reason(equal, graph, SubsetWeights::identity(c)).codes;
    const SubsetLabels labels = partition_neighbors(graph);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      bool used[3] = {false, false, false};
      for (int j : graph.neighborhood(i)) used[labels(i, j)] = true;
      const float k = float(used[0] + used[1] + used[2]);
      worst = std::max(worst, double((out.row(i) - k * s).cwiseAbs().maxCoeff()));
    }
    checks.bound("graph.subset_normalization", worst, 1e-5);
  });
  checks.guarded("graph.locality", [&] {
    const StyleCodeMatrix base(rng.uniform_matrix(n, c), all);
    const MatrixXf before = graph_reason(base, graph, w).codes;
    double changed = 0;
    for (int j = 0; j < n; ++j) {
      StyleCodeMatrix poked = base;
      poked.codes.row(j).array() += 3.0f;
      const MatrixXf after = graph_reason(poked, graph, w).codes;
      for (int i = 0; i < n; ++i) {
        const auto& hood = graph.neighborhood(i);
        if (std::find(hood.begin(), hood.end(), j) != hood.end()) continue;
        changed += (after.row(i) - before.row(i)).cwiseAbs().maxCoeff();
      }
    }
    checks.bound("graph.locality", changed, 0.0);
  });
}

void local_checks(Checks& checks, Rng& rng, const PipelineConfig& cfg) {
  const Tensor f = rng.uniform_tensor({3, 7, 6});
  const CorrelationOptions opts{cfg.patch_radius, cfg.neighborhood_radius, false};
  checks.guarded("local.cauchy_schwarz", [&] {
    const LocalCorrelationMap cm = self_correlation(f, opts);
    const int d = opts.neighborhood_radius;
    const Index span = 2 * d + 1;
    double worst = -1e9;
    for (Index y = 0; y < f.height(); ++y) {
      for (Index x = 0; x < f.width(); ++x) {
        for (Index dy = -d; dy <= d; ++dy) {
          for (Index dx = -d; dx <= d; ++dx) {
            const Index y2 = y + dy, x2 = x + dx;
            if (y2 < 0 || x2 < 0 || y2 >= f.height() || x2 >= f.width()) continue;
            const double cij = cm.values((dy + d) * span + dx + d, y, x);
            const double cii = cm.values(cm.center_channel(), y, x);
            const double cjj = cm.values(cm.center_channel(), y2, x2);
            worst = std::max(worst, std::abs(cij) - std::sqrt(cii) * std::sqrt(cjj));
          }
        }
      }
    }
    checks.bound("local.cauchy_schwarz", worst, 1e-5);
  });
  checks.guarded("local.loc_conv_superposition", [&] {
    const Tensor features = rng.uniform_tensor({2, 5, 5});
    const Index k2 = Index(cfg.kernel) * cfg.kernel;
    auto field = [&] {
      return ModulationField(5, 5, 2, cfg.kernel, rng.uniform_matrix(25, 2 * k2), rng.uniform_matrix(25, 2));
    };
    const ModulationField a = field(), b = field();
    ModulationField sum = a;
    sum.taps += b.taps;
    sum.bias += b.bias;
    Tensor expected = loc_conv(features, a, cfg.loc_conv());
    expected.flat() += loc_conv(features, b, cfg.loc_conv()).flat();
    checks.bound("local.loc_conv_superposition", max_abs_diff(loc_conv(features, sum, cfg.loc_conv()), expected), 1e-5);
  });
}

void transport_checks(Checks& checks, Rng& rng, const PipelineConfig& cfg) {
  checks.guarded("transport.marginals", [&] {
    const Tensor s = rng.uniform_tensor({4, 8, 8});
    const Tensor o = rng.uniform_tensor({4, 8, 8});
    SinkhornOptions opts = cfg.ot;
    opts.mode = TransportMode::Balanced;
    const TransportPlan plan = sinkhorn(cost_matrix<double>(s, o), opts);
    CheckResult r{"transport.marginals", CheckStatus::Pass, plan.marginal_violation, opts.tol,
                  "iterations=" + std::to_string(plan.iterations)};
    if (!plan.converged) {
      r.status = CheckStatus::Warn;
      r.detail += ", iteration budget exhausted before the marginal tolerance";
    }
    checks.add(r);
    checks.bound("transport.nonnegative", plan.matrix.minCoeff() < 0 ? 1.0 : 0.0, 0.0);
  });
  checks.guarded("transport.two_point_lp", [&] {
    BasicCostMatrix<double> cost{(Eigen::Matrix2d() << 0, 1, 1, 0).finished()};
    SinkhornOptions opts;
    opts.eps_reg = 0.01;
    const TransportPlan plan = sinkhorn(cost, opts);
    const Eigen::Matrix2d lp = (Eigen::Matrix2d() << 0.5, 0, 0, 0.5).finished();
    checks.bound("transport.two_point_lp", (plan.matrix - lp).cwiseAbs().maxCoeff(), 1e-3);
  });
  checks.guarded("transport.convex_warp", [&] {
    const Tensor s = rng.uniform_tensor({3, 4, 4});
    const TransportPlan plan = sinkhorn(cost_matrix<double>(s, s));
    ModulationField field = ModulationField::zeros(4, 4, 2, 3);
    field.taps.setConstant(0.75f);
    field.bias.setConstant(-1.25f);
    const ModulationField warped = warp_modulation(plan, field);
    const double err = std::max((warped.taps.array() - 0.75f).abs().maxCoeff(), (warped.bias.array() + 1.25f).abs().maxCoeff());
    checks.bound("transport.convex_warp", err, 1e-5);
  });
}

void objective_checks(Checks& checks, Rng& rng, const PipelineConfig& cfg) {
  const Tensor probs = rng.uniform_tensor({64}, 0.05f, 0.95f);
  Tensor target({64});
  for (float& v : target.values()) v = rng.below(2) ? 1.0f : 0.0f;
  checks.guarded("objectives.focal_gradient", [&] {
    const auto report = finite_diff_check([&](const Tensor& p) { return focal_loss(p, target, cfg.eta); }, probs,
                                          {1e-4, 1e-3, 64, 7});
    checks.bound("objectives.focal_gradient", report.max_relative_error, 1e-3);
  });
  checks.guarded("objectives.focal_bce", [&] {
    double worst = 0.0;
    const double focal = focal_loss(probs, target, 0.0).value;
    double bce = 0.0;
    for (Index i = 0; i < probs.size(); ++i) {
      const double p = probs[i];
      bce -= target[i] == 1.0f ? std::log(p) : std::log(1.0 - p);
    }
    worst = std::abs(focal - bce / double(probs.size()));
    checks.bound("objectives.focal_bce", worst, 1e-7);
  });
  checks.guarded("objectives.l1_gradient", [&] {
    const Tensor a = rng.uniform_tensor({48});
    const Tensor b = rng.uniform_tensor({48});
    const auto report =
        finite_diff_check([&](const Tensor& x) { return l1_loss(x, b); }, a, {1e-5, 1e-4, 48, 11});
    checks.bound("objectives.l1_gradient", report.max_relative_error, 1e-4);
  });
  checks.guarded("objectives.perceptual_identity", [&] {
    const Tensor img = rng.uniform_tensor({3, 16, 12}, 0.0f, 1.0f);
    const ConvStackExtractor extractor(cfg.perceptual_seed);
    checks.bound("objectives.perceptual_identity",
                 std::abs(perceptual_loss(img, img, extractor, cfg.perceptual_layers)), 0.0);
  });
}

void pipeline_checks(Checks& checks, const PipelineConfig& cfg) {
  checks.guarded("pipeline.determinism", [&] {
    const Networks nets = Networks::from_config(cfg);
    const Scene scene = synth_scene(cfg, 1);
    const auto a = run_pose_transfer(scene, cfg, nets);
    const auto b = run_pose_transfer(synth_scene(cfg, 1), cfg, nets);
    double differing = 0;
    for (std::size_t i = 0; i < a.stages.entries().size(); ++i) {
      differing += !a.stages.entries()[i].second.bit_equal(b.stages.entries()[i].second);
    }
    checks.bound("pipeline.determinism", differing, 0.0);
    checks.bound("pipeline.finite", a.image.all_finite() ? 0.0 : 1.0, 0.0);
  });
  checks.guarded("pipeline.zero_motion_gating", [&] {
    PipelineConfig still = cfg;
    still.scene.zero_motion = true;
    still.scene.noisy_segmentation = false;
    const auto r = run_pose_transfer(synth_scene(still, 2), still);
    const double occluded = static_cast<double>(r.occlusion.count());
    checks.bound("pipeline.zero_motion_gating", occluded + (r.conditioning.bit_equal(r.plain_conditioning) ? 0 : 1), 0.0);
  });
}

const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Warn: return "warn";
    case CheckStatus::Fail: return "fail";
  }
  return "fail";
}

}  // namespace

int SelftestReport::failures() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Fail; }));
}

int SelftestReport::warnings() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Warn; }));
}

bool SelftestReport::passed() const { return failures() == 0 && (!strict || warnings() == 0); }

nlohmann::json SelftestReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"status", status_name(c.status)},
                    {"measured", c.measured},
                    {"threshold", c.threshold},
                    {"detail", c.detail}});
  }
  return {{"checks", list},
          {"failures", failures()},
          {"warnings", warnings()},
          {"strict", strict},
          {"passed", passed()}};
}

SelftestReport run_selftest(const PipelineConfig& cfg) {
  SelftestReport report;
  report.strict = cfg.selftest_strict;
  Checks checks(report);
  Rng rng(20240607);
  tensor_checks(checks, rng);
  region_checks(checks, rng);
  graph_checks(checks, rng, cfg);
  local_checks(checks, rng, cfg);
  transport_checks(checks, rng, cfg);
  objective_checks(checks, rng, cfg);
  pipeline_checks(checks, cfg);
  return report;
}

}  // namespace glocal
