#include "glocal/region_style.hpp"

#include <algorithm>
#include <string>

namespace glocal {

namespace {

void require_same_extent(const Tensor& f, Index height, Index width, const char* what) {
  require_chw(f, what);
  if (f.height() != height || f.width() != width) {
    throw Error(std::string(what) + ": spatial extent mismatch " + shape_string(f.shape()) + " vs " +
                std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

StyleCodeMatrix::StyleCodeMatrix(MatrixXf codes_, std::vector<bool> present_)
    : codes(std::move(codes_)), present(std::move(present_)) {
  if (static_cast<Index>(present.size()) != codes.rows()) throw Error("style presence length does not match rows");
  if (!codes.allFinite()) throw Error("style codes contain non-finite values");
  for (Index n = 0; n < codes.rows(); ++n) {
    if (!present[static_cast<std::size_t>(n)] && !codes.row(n).isZero(0)) {
      throw Error("absent style row " + std::to_string(n) + " is not zero");
    }
  }
}

Index StyleCodeMatrix::present_count() const { return std::count(present.begin(), present.end(), true); }

LabelSet LabelSet::all_but_background(int num_labels) {
  std::vector<int> labels;
  for (int l = 1; l < num_labels; ++l) labels.push_back(l);
  return LabelSet(std::move(labels));
}

bool LabelSet::contains(int label) const { return std::find(labels_.begin(), labels_.end(), label) != labels_.end(); }

StyleCodeMatrix region_avg_pool(const Tensor& features, const SegmentationMap& seg, const PixelMask* exclude) {
  require_same_extent(features, seg.height(), seg.width(), "region_avg_pool");
  require_finite(features, "region_avg_pool");
  if (exclude && (exclude->height() != seg.height() || exclude->width() != seg.width())) {
    throw Error("region_avg_pool: exclusion mask extent mismatch");
  }

  const Index regions = seg.num_labels();
  const Index channels = features.channels();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(regions, channels);
  std::vector<Index> counts(static_cast<std::size_t>(regions), 0);
  const auto f = features.as_matrix();

  for (Index p = 0; p < seg.labels().size(); ++p) {
    if (exclude && exclude->at(p)) continue;
    const int n = seg.at(p);
    sums.row(n) += f.col(p).cast<double>().transpose();
    ++counts[static_cast<std::size_t>(n)];
  }

  MatrixXf codes = MatrixXf::Zero(regions, channels);
  std::vector<bool> present(static_cast<std::size_t>(regions), false);
  for (Index n = 0; n < regions; ++n) {
    const Index count = counts[static_cast<std::size_t>(n)];
    if (count == 0) continue;
    codes.row(n) = (sums.row(n) / static_cast<double>(count)).cast<float>();
    present[static_cast<std::size_t>(n)] = true;
  }
  return StyleCodeMatrix(std::move(codes), std::move(present));
}

OcclusionMask occlusion_mask(const SegmentationMap& seg, const VisibilityMap& visibility, const LabelSet& foreground) {
  if (seg.height() != visibility.height() || seg.width() != visibility.width()) {
    throw Error("occlusion_mask: segmentation and visibility extents differ");
  }
  OcclusionMask mask(seg.height(), seg.width());
  for (Index y = 0; y < seg.height(); ++y) {
    for (Index x = 0; x < seg.width(); ++x) {
      mask.set(y, x, visibility(y, x) && foreground.contains(seg(y, x)));
    }
  }
  return mask;
}

Tensor broadcast_styles(const StyleCodeMatrix& styles, const SegmentationMap& seg) {
  if (seg.num_labels() > styles.regions()) {
    throw Error("broadcast_styles: segmentation has " + std::to_string(seg.num_labels()) + " labels but only " +
                std::to_string(styles.regions()) + " style rows");
  }
  Tensor out = Tensor::chw(styles.channels(), seg.height(), seg.width());
  auto m = out.as_matrix();
  for (Index p = 0; p < seg.labels().size(); ++p) m.col(p) = styles.codes.row(seg.at(p)).transpose();
  return out;
}

StyleCodeMatrix style_conv(const StyleCodeMatrix& styles, const MatrixXf& weight, const VectorXf& bias) {
  if (weight.cols() != styles.channels() || weight.rows() != bias.size()) {
    throw Error("style_conv: weight " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                " and bias " + std::to_string(bias.size()) + " do not fit " + std::to_string(styles.channels()) +
                " style channels");
  }
  MatrixXf codes = MatrixXf::Zero(styles.regions(), weight.rows());
  for (Index n = 0; n < styles.regions(); ++n) {
    if (!styles.present[static_cast<std::size_t>(n)]) continue;
    codes.row(n) = (weight * styles.codes.row(n).transpose() + bias).transpose();
  }
  return StyleCodeMatrix(std::move(codes), styles.present);
}

Tensor modulate(const Tensor& features, const Tensor& gamma, const Tensor& beta, float epsilon) {
  require_same_shape(features, gamma, "modulate");
  require_same_shape(features, beta, "modulate");
  require_finite(gamma, "modulate");
  require_finite(beta, "modulate");
  Tensor out = channel_normalize(features, epsilon).values;
  out.flat() = (gamma.flat().array() * out.flat().array() + beta.flat().array()).matrix();
  return out;
}

}  // namespace glocal
