#pragma once

#include "glocal/random.hpp"
#include "glocal/region_style.hpp"
#include "glocal/tensor.hpp"

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing_support {

using namespace glocal;

inline SegmentationMap random_segmentation(Rng& rng, Index h, Index w, int labels) {
  SegmentationMap seg(h, w, labels);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) seg.set(y, x, static_cast<int>(rng.below(static_cast<std::uint32_t>(labels))));
  return seg;
}

/// C x H x W features that are constant inside every region of `seg`.
inline Tensor region_constant(Rng& rng, const SegmentationMap& seg, Index channels) {
  const MatrixXf rows = rng.uniform_matrix(seg.num_labels(), channels, -3.0f, 3.0f);
  Tensor t = Tensor::chw(channels, seg.height(), seg.width());
  for (Index c = 0; c < channels; ++c)
    for (Index y = 0; y < seg.height(); ++y)
      for (Index x = 0; x < seg.width(); ++x) t(c, y, x) = rows(seg(y, x), c);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return (a.flat().cast<double>() - b.flat().cast<double>()).cwiseAbs().maxCoeff();
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("glocal_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
