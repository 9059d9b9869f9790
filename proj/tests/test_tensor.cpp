#include "glocal/image_io.hpp"
#include "glocal/tensor.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

using namespace glocal;
using testing_support::TempDir;

namespace {

TensorIoError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const TensorIoError& e) {
    return e.kind();
  }
  FAIL("decode accepted a malformed buffer");
  return TensorIoError::Kind::Io;
}

std::vector<std::uint8_t> header(std::uint32_t rank, std::vector<std::uint32_t> extents) {
  std::vector<std::uint8_t> b{'G', 'L', 'T', '1'};
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put(rank);
  for (auto e : extents) put(e);
  return b;
}

}  // namespace

TEST_CASE("tensor shape validation") {
  CHECK_THROWS_AS(Tensor(Shape{}), Error);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 3, 4, 5}), Error);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), Error);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, VectorXf::Zero(3)), Error);
  const Tensor t = Tensor::chw(2, 3, 4, 1.5f);
  CHECK(t.size() == 24);
  CHECK(t(1, 2, 3) == 1.5f);
}

TEST_CASE("channel_normalize constant channel") {
  const Tensor t = Tensor::chw(1, 3, 3, 5.0f);
  const auto n = channel_normalize(t, 1e-5f);
  CHECK(n.values.flat().cwiseAbs().maxCoeff() == 0.0f);
  CHECK(n.mean[0] == 5.0f);
  CHECK(n.stddev[0] == 0.0f);
}

TEST_CASE("channel_normalize two point case") {
  Tensor t = Tensor::chw(1, 1, 2);
  t[0] = 1.0f;
  t[1] = 3.0f;
  const auto n = channel_normalize(t, 0.0f);
  CHECK(n.values[0] == -1.0f);
  CHECK(n.values[1] == 1.0f);
  CHECK(n.mean[0] == 2.0f);
  CHECK(n.stddev[0] == 1.0f);
}

TEST_CASE("channel_normalize moments on random input") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor t = rng.uniform_tensor({3, 4, 4}, -4.0f, 4.0f);
    const auto n = channel_normalize(t, 1e-5f);
    for (Index c = 0; c < 3; ++c) {
      const auto row = n.values.as_matrix().row(c).cast<double>();
      const double m = row.mean();
      const double sd = std::sqrt((row.array() - m).square().mean());
      CHECK(std::abs(m) <= 1e-6);
      CHECK(std::abs(sd - 1.0) <= 1e-5);
    }
  }
}

TEST_CASE("channel_normalize rejects non-finite input and negative epsilon") {
  Tensor t = Tensor::chw(1, 2, 2);
  t[1] = std::nanf("");
  CHECK_THROWS_AS(channel_normalize(t), Error);
  CHECK_THROWS_AS(channel_normalize(Tensor::chw(1, 2, 2), -1.0f), Error);
}

TEST_CASE("channel_normalize is bit-deterministic") {
  Rng rng(4);
  const Tensor t = rng.uniform_tensor({4, 6, 5});
  CHECK(channel_normalize(t).values.bit_equal(channel_normalize(t).values));
}

TEST_CASE("GLT1 round trip for every rank") {
  Rng rng(5);
  TempDir dir("tensor");
  for (Index rank = 1; rank <= 4; ++rank) {
    for (int trial = 0; trial < 5; ++trial) {
      Shape shape;
      for (Index i = 0; i < rank; ++i) shape.push_back(1 + rng.below(5));
      const Tensor t = rng.uniform_tensor(shape, -1e6f, 1e6f);
      const auto file = dir / ("t" + std::to_string(rank) + ".glt");
      save_tensor(file, t);
      CHECK(load_tensor(file).bit_equal(t));
      CHECK(decode_tensor(encode_tensor(t)).bit_equal(t));
    }
  }
}

TEST_CASE("GLT1 byte layout is little endian") {
  Tensor t({2});
  t[0] = 1.0f;
  t[1] = -2.0f;
  const auto bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 8);
  CHECK(std::memcmp(bytes.data(), "GLT1", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  // 1.0f = 0x3f800000
  CHECK(bytes[12] == 0x00);
  CHECK(bytes[15] == 0x3f);
}

TEST_CASE("GLT1 diagnostics are distinct") {
  auto good = encode_tensor(Tensor({2, 2}, 1.0f));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(decode_kind(bad_magic) == TensorIoError::Kind::BadMagic);

  CHECK(decode_kind(header(0, {})) == TensorIoError::Kind::EmptyShape);
  CHECK(decode_kind(header(5, {1, 1, 1, 1, 1})) == TensorIoError::Kind::BadRank);
  CHECK(decode_kind(header(2, {2, 0})) == TensorIoError::Kind::BadExtent);
  CHECK(decode_kind(header(3, {2})) == TensorIoError::Kind::TruncatedHeader);

  auto truncated = good;
  truncated.resize(truncated.size() - 4);
  CHECK(decode_kind(truncated) == TensorIoError::Kind::TruncatedPayload);

  auto nan = header(1, {1});
  const float q = std::nanf("");
  std::uint8_t raw[4];
  std::memcpy(raw, &q, 4);
  nan.insert(nan.end(), raw, raw + 4);
  CHECK(decode_kind(nan) == TensorIoError::Kind::NonFinite);

  CHECK_THROWS_AS(load_tensor("/nonexistent/file.glt"), TensorIoError);
}

TEST_CASE("empty-shape file is a structured error") {
  TempDir dir("empty");
  const auto file = dir / "empty.glt";
  {
    std::ofstream out(file, std::ios::binary);
    const auto bytes = header(0, {});
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    load_tensor(file);
    FAIL("expected an error");
  } catch (const TensorIoError& e) {
    CHECK(e.kind() == TensorIoError::Kind::EmptyShape);
  }
}

TEST_CASE("segmentation and binary maps validate values") {
  LabelImage labels(2, 2);
  labels << 0, 1, 2, 3;
  CHECK_THROWS_AS(SegmentationMap(labels, 3), Error);
  CHECK_THROWS_AS(SegmentationMap(labels, 0), Error);
  const SegmentationMap seg(labels, 4);
  CHECK(seg.histogram() == std::vector<Index>{1, 1, 1, 1});

  FlagImage flags(1, 2);
  flags << 0, 2;
  CHECK_THROWS_AS(PixelMask{flags}, Error);
}

TEST_CASE("netpbm round trips") {
  Rng rng(6);
  TempDir dir("pnm");
  Tensor img = rng.uniform_tensor({3, 5, 4}, 0.0f, 1.0f);
  write_ppm(dir / "a.ppm", img);
  const Tensor back = read_ppm(dir / "a.ppm");
  CHECK(back.shape() == img.shape());
  CHECK(testing_support::max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-6);

  const SegmentationMap seg = testing_support::random_segmentation(rng, 5, 4, 8);
  write_pgm(dir / "s.pgm", seg);
  CHECK(read_pgm_labels(dir / "s.pgm", 8).labels() == seg.labels());
  CHECK_THROWS_AS(read_pgm_labels(dir / "s.pgm", 2), Error);

  FlagImage flags(3, 3);
  flags << 0, 1, 0, 1, 1, 0, 0, 0, 1;
  write_pgm(dir / "f.pgm", flags);
  CHECK(read_pgm_flags(dir / "f.pgm") == flags);
  CHECK_THROWS_AS(read_ppm(dir / "f.pgm"), Error);
}
