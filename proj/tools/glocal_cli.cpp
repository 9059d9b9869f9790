#include "glocal/image_io.hpp"
#include "glocal/pipeline.hpp"
#include "glocal/selftest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace glocal;

namespace {

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

nlohmann::json tensor_summary(const Tensor& t) {
  const auto v = t.flat();
  return {{"shape", t.shape()}, {"min", v.minCoeff()}, {"max", v.maxCoeff()}, {"mean", v.mean()}};
}

int pose_transfer(const std::string& config_path, std::uint64_t seed, const fs::path& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  const Scene scene = synth_scene(cfg, seed);
  const PoseTransferResult r = run_pose_transfer(scene, cfg);

  fs::create_directories(out);
  write_ppm(out / "source.ppm", scene.source_image);
  write_ppm(out / "target.ppm", scene.target_image);
  write_ppm(out / "generated.ppm", r.image);
  write_pgm(out / "source_seg.pgm", scene.source_seg);
  write_pgm(out / "target_seg.pgm", scene.predicted_seg);
  write_pgm(out / "occlusion.pgm", r.occlusion.flags());
  save_tensor(out / "generated.glt", r.image);

  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [name, value] : r.stages.entries()) stages[name] = tensor_summary(value);
  write_json(out / "report.json", {{"seed", seed},
                                   {"config", config_to_json(cfg)},
                                   {"occluded_pixels", r.occlusion.count()},
                                   {"transport",
                                    {{"iterations", r.plan.iterations},
                                     {"marginal_violation", r.plan.marginal_violation},
                                     {"converged", r.plan.converged}}},
                                   {"stages", stages}});
  std::cout << "wrote " << (out / "generated.ppm").string() << '\n';
  return 0;
}

std::vector<int> parse_labels(const std::string& text) {
  std::vector<int> labels;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      labels.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error("bad label list entry '" + item + "'");
    }
  }
  return labels;
}

int inpaint(const std::string& config_path, const fs::path& image_path, const fs::path& seg_path,
            const fs::path& mask_path, const std::string& mask_labels, const fs::path& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  const Tensor image = read_ppm(image_path);
  const SegmentationMap seg = read_pgm_labels(seg_path, cfg.regions);

  PixelMask mask(seg.height(), seg.width());
  if (!mask_path.empty()) {
    mask = PixelMask(read_pgm_flags(mask_path));
  } else {
    mask = semantic_mask(seg, parse_labels(mask_labels));
  }
  const InpaintResult r = run_inpainting(image, seg, mask, cfg);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  write_ppm(out, r.image);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int selftest(const std::string& config_path) {
  const SelftestReport report = run_selftest(config_or_default(config_path));
  std::cout << report.to_json().dump(2) << '\n';
  return report.exit_code();
}

int dump_intermediates(const std::string& config_path, std::uint64_t seed, const std::string& stage,
                       const fs::path& out, bool list) {
  if (list) {
    for (const auto& name : pose_transfer_stage_names()) std::cout << name << '\n';
    return 0;
  }
  const auto names = pose_transfer_stage_names();
  if (std::find(names.begin(), names.end(), stage) == names.end()) {
    std::cerr << "unknown stage '" << stage << "'; use --list to see stage names\n";
    return 2;
  }
  const PipelineConfig cfg = config_or_default(config_path);
  const PoseTransferResult r = run_pose_transfer(synth_scene(cfg, seed), cfg);
  const Tensor& t = r.stages.at(stage);
  const fs::path target = out.empty() ? fs::path(stage + ".glt") : out;
  save_tensor(target, t);
  std::cout << stage << ' ' << shape_string(t.shape()) << " -> " << target.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GLocal forward-pass operators"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;

  auto* pt = app.add_subcommand("pose-transfer", "Run pose transfer on a synthetic scene");
  fs::path pt_out;
  pt->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  pt->add_option("--seed", seed, "Scene seed");
  pt->add_option("--out", pt_out, "Output directory")->required();

  auto* ip = app.add_subcommand("inpaint", "Fill masked pixels of an image");
  fs::path ip_image, ip_seg, ip_mask, ip_out;
  std::string ip_labels;
  ip->add_option("--image", ip_image, "Input PPM")->required()->check(CLI::ExistingFile);
  ip->add_option("--seg", ip_seg, "Label map PGM")->required()->check(CLI::ExistingFile);
  auto* mask_opt = ip->add_option("--mask", ip_mask, "Binary mask PGM")->check(CLI::ExistingFile);
  auto* labels_opt = ip->add_option("--mask-labels", ip_labels, "Comma separated labels to remove");
  mask_opt->excludes(labels_opt);
  ip->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  ip->add_option("--out", ip_out, "Output PPM")->required();

  auto* st = app.add_subcommand("selftest", "Run invariant and gradient checks");
  st->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);

  auto* di = app.add_subcommand("dump-intermediates", "Write one pose-transfer stage as GLT1");
  std::string stage;
  fs::path di_out;
  bool list = false;
  di->add_option("--stage", stage, "Stage name");
  di->add_flag("--list", list, "Print stage names");
  di->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  di->add_option("--seed", seed, "Scene seed");
  di->add_option("--out", di_out, "Output file (default <stage>.glt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pt) return pose_transfer(config_path, seed, pt_out);
    if (*ip) {
      if (ip_mask.empty() && ip_labels.empty()) {
        std::cerr << "inpaint needs --mask or --mask-labels\n";
        return 2;
      }
      return inpaint(config_path, ip_image, ip_seg, ip_mask, ip_labels, ip_out);
    }
    if (*st) return selftest(config_path);
    if (*di) {
      if (!list && stage.empty()) {
        std::cerr << "dump-intermediates needs --stage NAME or --list\n";
        return 2;
      }
      return dump_intermediates(config_path, seed, stage, di_out, list);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
