#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glocal {

/// Base exception for every diagnostic raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using VectorXf = Eigen::VectorXf;
using MatrixXf = Eigen::MatrixXf;
using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense rank 1..4 float array, row-major. Feature maps use C x H x W.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, VectorXf data);

  static Tensor chw(Index channels, Index height, Index width, float fill = 0.0f) {
    return Tensor({channels, height, width}, fill);
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  // Rank-3 accessors.
  Index channels() const { return extent(0); }
  Index height() const { return extent(1); }
  Index width() const { return extent(2); }
  Index plane_size() const { return height() * width(); }

  float& operator()(Index c, Index y, Index x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  float operator()(Index c, Index y, Index x) const { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  float& operator[](Index i) { return data_[i]; }
  float operator[](Index i) const { return data_[i]; }

  VectorXf& flat() { return data_; }
  const VectorXf& flat() const { return data_; }
  std::span<float> values() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const float> values() const { return {data_.data(), static_cast<std::size_t>(data_.size())}; }

  /// Rank-3 tensor viewed as a C x (H*W) row-major matrix.
  Eigen::Map<RowMatrixXf> as_matrix();
  Eigen::Map<const RowMatrixXf> as_matrix() const;

  /// Channel c of a rank-3 tensor viewed as an H x W row-major matrix.
  Eigen::Map<RowMatrixXf> plane(Index c);
  Eigen::Map<const RowMatrixXf> plane(Index c) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const { return data_.allFinite(); }

  /// Exact equality of shape and bit pattern.
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  VectorXf data_;
};

std::string shape_string(const Shape& shape);

/// Throws when the tensor is not rank 3.
void require_chw(const Tensor& t, const char* what);
/// Throws when any value is NaN or infinite.
void require_finite(const Tensor& t, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

using LabelImage = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FlagImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel region labels in [0, num_labels).
class SegmentationMap {
 public:
  SegmentationMap() = default;
  SegmentationMap(LabelImage labels, int num_labels);
  SegmentationMap(Index height, Index width, int num_labels, int fill = 0);

  Index height() const { return labels_.rows(); }
  Index width() const { return labels_.cols(); }
  int num_labels() const { return num_labels_; }
  int operator()(Index y, Index x) const { return labels_(y, x); }
  int at(Index pixel) const { return labels_.data()[pixel]; }
  const LabelImage& labels() const { return labels_; }

  void set(Index y, Index x, int label);
  /// Number of pixels carrying each label.
  std::vector<Index> histogram() const;

 private:
  LabelImage labels_;
  int num_labels_ = 1;
};

/// Binary per-pixel map. The tag keeps visibility and occlusion maps apart.
template <typename Tag>
class BinaryMap {
 public:
  BinaryMap() = default;
  BinaryMap(Index height, Index width) : flags_(FlagImage::Zero(height, width)) {}
  explicit BinaryMap(FlagImage flags) : flags_(std::move(flags)) {
    for (Index i = 0; i < flags_.size(); ++i) {
      if (flags_.data()[i] > 1) throw Error("binary map holds a value other than 0 or 1");
    }
  }

  Index height() const { return flags_.rows(); }
  Index width() const { return flags_.cols(); }
  bool operator()(Index y, Index x) const { return flags_(y, x) != 0; }
  bool at(Index pixel) const { return flags_.data()[pixel] != 0; }
  void set(Index y, Index x, bool value) { flags_(y, x) = value ? 1 : 0; }
  const FlagImage& flags() const { return flags_; }
  Index count() const { return flags_.template cast<Index>().sum(); }
  bool none() const { return count() == 0; }

 private:
  FlagImage flags_;
};

struct VisibilityTag {};
struct OcclusionTag {};
struct MaskTag {};

/// 1 marks a target position without a visible source correspondence.
using VisibilityMap = BinaryMap<VisibilityTag>;
/// 1 marks an occluded target position.
using OcclusionMask = BinaryMap<OcclusionTag>;
/// Generic inpainting/selection mask, 1 = selected.
using PixelMask = BinaryMap<MaskTag>;

struct NormalizedChannels {
  Tensor values;
  VectorXf mean;
  VectorXf stddev;
};

/// Per-channel (x - mean) / (stddev + epsilon) with population statistics.
/// A channel whose denominator is exactly zero maps to zero.
NormalizedChannels channel_normalize(const Tensor& features, float epsilon = 1e-5f);

// Binary tensor files: "GLT1", u32 rank, rank x u32 extents, f32 payload; all little endian.

class TensorIoError : public Error {
 public:
  enum class Kind { Io, BadMagic, EmptyShape, BadRank, BadExtent, TruncatedHeader, TruncatedPayload, NonFinite };
  TensorIoError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace glocal
