#include "glocal/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace glocal {

namespace {

struct Netpbm {
  std::string magic;
  Index width = 0;
  Index height = 0;
  int maxval = 0;
  std::vector<std::uint8_t> samples;
};

void skip_space_and_comments(std::istream& in) {
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

long read_header_int(std::istream& in, const std::filesystem::path& path) {
  skip_space_and_comments(in);
  long v = -1;
  in >> v;
  if (!in || v < 0) throw Error("malformed netpbm header in " + path.string());
  return v;
}

Netpbm read_netpbm(const std::filesystem::path& path, const std::string& expected_magic, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Netpbm img;
  in >> img.magic;
  if (img.magic != expected_magic) throw Error(path.string() + ": expected " + expected_magic + " image");
  img.width = read_header_int(in, path);
  img.height = read_header_int(in, path);
  img.maxval = static_cast<int>(read_header_int(in, path));
  if (img.width < 1 || img.height < 1) throw Error(path.string() + ": empty image");
  if (img.maxval < 1 || img.maxval > 255) throw Error(path.string() + ": only 8-bit netpbm is supported");
  in.get();  // single whitespace before raster
  img.samples.resize(static_cast<std::size_t>(img.width * img.height * channels));
  in.read(reinterpret_cast<char*>(img.samples.data()), static_cast<std::streamsize>(img.samples.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.samples.size())) throw Error(path.string() + ": truncated raster");
  return img;
}

void write_netpbm(const std::filesystem::path& path, const char* magic, Index width, Index height, int maxval,
                  const std::vector<std::uint8_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << magic << '\n' << width << ' ' << height << '\n' << maxval << '\n';
  out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  require_chw(rgb, "write_ppm");
  if (rgb.channels() != 3) throw Error("write_ppm: expected 3 channels");
  std::vector<std::uint8_t> samples;
  samples.reserve(static_cast<std::size_t>(rgb.size()));
  for (Index y = 0; y < rgb.height(); ++y) {
    for (Index x = 0; x < rgb.width(); ++x) {
      for (Index c = 0; c < 3; ++c) {
        const float v = std::clamp(rgb(c, y, x), 0.0f, 1.0f);
        samples.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  write_netpbm(path, "P6", rgb.width(), rgb.height(), 255, samples);
}

Tensor read_ppm(const std::filesystem::path& path) {
  const Netpbm img = read_netpbm(path, "P6", 3);
  Tensor rgb = Tensor::chw(3, img.height, img.width);
  std::size_t i = 0;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < 3; ++c) rgb(c, y, x) = static_cast<float>(img.samples[i++]) / float(img.maxval);
    }
  }
  return rgb;
}

void write_pgm(const std::filesystem::path& path, const SegmentationMap& seg) {
  if (seg.num_labels() > 256) throw Error("write_pgm: more than 256 labels");
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(seg.labels().size()));
  for (Index i = 0; i < seg.labels().size(); ++i) samples[static_cast<std::size_t>(i)] = std::uint8_t(seg.at(i));
  write_netpbm(path, "P5", seg.width(), seg.height(), std::max(seg.num_labels() - 1, 1), samples);
}

SegmentationMap read_pgm_labels(const std::filesystem::path& path, int num_labels) {
  const Netpbm img = read_netpbm(path, "P5", 1);
  LabelImage labels(img.height, img.width);
  for (Index i = 0; i < labels.size(); ++i) labels.data()[i] = img.samples[static_cast<std::size_t>(i)];
  return SegmentationMap(std::move(labels), num_labels);
}

void write_pgm(const std::filesystem::path& path, const FlagImage& flags) {
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(flags.size()));
  for (Index i = 0; i < flags.size(); ++i) samples[static_cast<std::size_t>(i)] = flags.data()[i] ? 1 : 0;
  write_netpbm(path, "P5", flags.cols(), flags.rows(), 1, samples);
}

FlagImage read_pgm_flags(const std::filesystem::path& path) {
  const Netpbm img = read_netpbm(path, "P5", 1);
  FlagImage flags(img.height, img.width);
  for (Index i = 0; i < flags.size(); ++i) flags.data()[i] = img.samples[static_cast<std::size_t>(i)] ? 1 : 0;
  return flags;
}

}  // namespace glocal
