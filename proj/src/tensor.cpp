#include "glocal/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace glocal {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'L', 'T', '1'};
constexpr Index kMaxRank = 4;

Index checked_volume(const Shape& shape) {
  if (shape.empty() || static_cast<Index>(shape.size()) > kMaxRank) {
    throw Error("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  Index volume = 1;
  for (Index e : shape) {
    if (e < 1) throw Error("tensor extents must be positive: " + shape_string(shape));
    volume *= e;
  }
  return volume;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  data_ = VectorXf::Constant(checked_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, VectorXf data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_volume(shape_) != data_.size()) {
    throw Error("tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }
}

Eigen::Map<RowMatrixXf> Tensor::as_matrix() {
  require_chw(*this, "as_matrix");
  return {data_.data(), channels(), plane_size()};
}

Eigen::Map<const RowMatrixXf> Tensor::as_matrix() const {
  require_chw(*this, "as_matrix");
  return {data_.data(), channels(), plane_size()};
}

Eigen::Map<RowMatrixXf> Tensor::plane(Index c) {
  require_chw(*this, "plane");
  return {data_.data() + c * plane_size(), height(), width()};
}

Eigen::Map<const RowMatrixXf> Tensor::plane(Index c) const {
  require_chw(*this, "plane");
  return {data_.data() + c * plane_size(), height(), width()};
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(), sizeof(float) * static_cast<std::size_t>(data_.size())) == 0;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

void require_chw(const Tensor& t, const char* what) {
  if (t.rank() != 3) throw Error(std::string(what) + ": expected a C x H x W tensor, got " + shape_string(t.shape()));
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw Error(std::string(what) + ": input contains non-finite values");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

SegmentationMap::SegmentationMap(LabelImage labels, int num_labels) : labels_(std::move(labels)), num_labels_(num_labels) {
  if (num_labels_ < 1) throw Error("segmentation needs at least one label");
  if (labels_.size() == 0) throw Error("segmentation map is empty");
  for (Index i = 0; i < labels_.size(); ++i) {
    const int l = labels_.data()[i];
    if (l < 0 || l >= num_labels_) {
      throw Error("segmentation label " + std::to_string(l) + " outside [0, " + std::to_string(num_labels_) + ")");
    }
  }
}

SegmentationMap::SegmentationMap(Index height, Index width, int num_labels, int fill)
    : SegmentationMap(LabelImage::Constant(height, width, fill), num_labels) {}

void SegmentationMap::set(Index y, Index x, int label) {
  if (label < 0 || label >= num_labels_) throw Error("segmentation label out of range: " + std::to_string(label));
  labels_(y, x) = label;
}

std::vector<Index> SegmentationMap::histogram() const {
  std::vector<Index> counts(static_cast<std::size_t>(num_labels_), 0);
  for (Index i = 0; i < labels_.size(); ++i) ++counts[static_cast<std::size_t>(labels_.data()[i])];
  return counts;
}

NormalizedChannels channel_normalize(const Tensor& features, float epsilon) {
  require_chw(features, "channel_normalize");
  require_finite(features, "channel_normalize");
  if (!(epsilon >= 0.0f)) throw Error("channel_normalize: epsilon must be non-negative");

  const Index channels = features.channels();
  const Index n = features.plane_size();
  NormalizedChannels out{Tensor(features.shape()), VectorXf(channels), VectorXf(channels)};
  const auto in = features.as_matrix();
  auto result = out.values.as_matrix();

  for (Index c = 0; c < channels; ++c) {
    const auto row = in.row(c).cast<double>();
    const double mean = row.sum() / static_cast<double>(n);
    const double var = (row.array() - mean).square().sum() / static_cast<double>(n);
    const double sigma = std::sqrt(var);
    const double denom = sigma + static_cast<double>(epsilon);
    out.mean[c] = static_cast<float>(mean);
    out.stddev[c] = static_cast<float>(sigma);
    if (denom > 0.0) {
      result.row(c) = ((row.array() - mean) / denom).cast<float>().matrix();
    } else {
      result.row(c).setZero();
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.empty()) throw TensorIoError(TensorIoError::Kind::EmptyShape, "cannot encode an empty tensor");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(8 + 4 * t.shape().size() + 4 * static_cast<std::size_t>(t.size()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (Index e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  using Kind = TensorIoError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw TensorIoError(Kind::BadMagic, "bad magic: not a GLT1 tensor file");
  }
  if (bytes.size() < 8) throw TensorIoError(Kind::TruncatedHeader, "truncated header: missing rank");
  const std::uint32_t rank = get_u32(bytes.data() + 4);
  if (rank == 0) throw TensorIoError(Kind::EmptyShape, "empty shape: rank 0 tensor");
  if (rank > kMaxRank) throw TensorIoError(Kind::BadRank, "rank " + std::to_string(rank) + " exceeds 4");
  const std::size_t header = 8 + 4 * std::size_t(rank);
  if (bytes.size() < header) throw TensorIoError(Kind::TruncatedHeader, "truncated header: missing extents");

  Shape shape;
  std::uint64_t volume = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t e = get_u32(bytes.data() + 8 + 4 * i);
    if (e == 0) throw TensorIoError(Kind::BadExtent, "zero extent on axis " + std::to_string(i));
    volume *= e;
    if (volume > (std::uint64_t(1) << 34)) throw TensorIoError(Kind::BadExtent, "tensor volume too large");
    shape.push_back(static_cast<Index>(e));
  }
  const std::uint64_t payload = bytes.size() - header;
  if (payload < 4 * volume) {
    throw TensorIoError(Kind::TruncatedPayload, "truncated payload: expected " + std::to_string(4 * volume) +
                                                    " bytes, found " + std::to_string(payload));
  }

  VectorXf data(static_cast<Index>(volume));
  for (std::uint64_t i = 0; i < volume; ++i) {
    data[static_cast<Index>(i)] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
  }
  if (!data.allFinite()) throw TensorIoError(Kind::NonFinite, "payload contains non-finite values");
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TensorIoError(TensorIoError::Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorIoError(TensorIoError::Kind::Io, "write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(TensorIoError::Kind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace glocal
