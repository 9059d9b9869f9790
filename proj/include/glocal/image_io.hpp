#pragma once

#include "glocal/tensor.hpp"

#include <filesystem>

namespace glocal {

// Binary netpbm images. RGB images are 3 x H x W tensors with values in [0, 1].

void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
Tensor read_ppm(const std::filesystem::path& path);

/// Label maps are stored with maxval = max(N - 1, 1).
void write_pgm(const std::filesystem::path& path, const SegmentationMap& seg);
/// Reads a label map; labels must be < num_labels.
SegmentationMap read_pgm_labels(const std::filesystem::path& path, int num_labels);

/// Binary maps are stored with maxval = 1; any nonzero sample reads as 1.
void write_pgm(const std::filesystem::path& path, const FlagImage& flags);
FlagImage read_pgm_flags(const std::filesystem::path& path);

}  // namespace glocal
