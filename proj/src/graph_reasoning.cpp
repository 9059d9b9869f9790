#include "glocal/graph_reasoning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glocal {

EdgeList default_body_edges() { return {{1, 2}, {2, 3}, {3, 5}, {3, 4}, {4, 6}, {6, 7}}; }

BodyGraph::BodyGraph(int nodes, const EdgeList& edges, Eigen::MatrixX2d anchors, std::vector<bool> present)
    : nodes_(nodes), anchors_(std::move(anchors)), neighborhoods_(static_cast<std::size_t>(nodes)) {
  if (nodes_ < 1) throw Error("body graph needs at least one node");
  if (anchors_.rows() != nodes_ || static_cast<int>(present.size()) != nodes_) {
    throw Error("body graph: anchor/presence count does not match node count");
  }
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= nodes_ || b >= nodes_) {
      throw Error("edge (" + std::to_string(a) + "," + std::to_string(b) + ") references a label >= " +
                  std::to_string(nodes_));
    }
    if (a == b) continue;
    const Edge e{std::min(a, b), std::max(a, b)};
    if (std::find(edges_.begin(), edges_.end(), e) == edges_.end()) edges_.push_back(e);
  }
  std::sort(edges_.begin(), edges_.end());

  for (int i = 0; i < nodes_; ++i) neighborhoods_[static_cast<std::size_t>(i)].push_back(i);
  for (auto [a, b] : edges_) {
    neighborhoods_[static_cast<std::size_t>(a)].push_back(b);
    neighborhoods_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& hood : neighborhoods_) std::sort(hood.begin() + 1, hood.end());

  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int count = 0;
  for (int i = 0; i < nodes_; ++i) {
    if (!present[static_cast<std::size_t>(i)]) continue;
    sum += anchors_.row(i).transpose();
    ++count;
  }
  gravity_center_ = count ? Eigen::Vector2d(sum / count) : Eigen::Vector2d::Zero();
  for (int i = 0; i < nodes_; ++i) {
    if (!present[static_cast<std::size_t>(i)]) anchors_.row(i) = gravity_center_.transpose();
  }
  centrifugal_ = (anchors_.rowwise() - gravity_center_.transpose()).rowwise().norm();
  tie_tolerance_ = kRelativeTieTolerance * centrifugal_.maxCoeff();
}

bool BodyGraph::adjacent(int a, int b) const {
  const auto& hood = neighborhood(a);
  return std::find(hood.begin() + 1, hood.end(), b) != hood.end();
}

BodyGraph build_body_graph(const SegmentationMap& seg, const EdgeList& edges) {
  const int nodes = seg.num_labels();
  Eigen::MatrixX2d sums = Eigen::MatrixX2d::Zero(nodes, 2);
  std::vector<Index> counts(static_cast<std::size_t>(nodes), 0);
  for (Index y = 0; y < seg.height(); ++y) {
    for (Index x = 0; x < seg.width(); ++x) {
      const int n = seg(y, x);
      sums(n, 0) += static_cast<double>(x);
      sums(n, 1) += static_cast<double>(y);
      ++counts[static_cast<std::size_t>(n)];
    }
  }
  std::vector<bool> present(static_cast<std::size_t>(nodes));
  for (int n = 0; n < nodes; ++n) {
    const Index c = counts[static_cast<std::size_t>(n)];
    present[static_cast<std::size_t>(n)] = c > 0;
    if (c > 0) sums.row(n) /= static_cast<double>(c);
  }
  return BodyGraph(nodes, edges, std::move(sums), std::move(present));
}

SubsetLabels partition_neighbors(const BodyGraph& graph) {
  const int n = graph.nodes();
  const auto& e = graph.centrifugal();
  const double tol = graph.tie_tolerance();
  SubsetLabels labels = SubsetLabels::Constant(n, n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j : graph.neighborhood(i)) {
      const double diff = e[j] - e[i];
      labels(i, j) = std::abs(diff) <= tol ? 0 : (diff < 0 ? 1 : 2);
    }
  }
  return labels;
}

SubsetWeights SubsetWeights::identity(Index channels) {
  const MatrixXf eye = MatrixXf::Identity(channels, channels);
  return {{eye, eye, eye}};
}

StyleCodeMatrix graph_reason(const StyleCodeMatrix& styles, const BodyGraph& graph, const SubsetWeights& weights) {
  if (styles.regions() != graph.nodes()) {
    throw Error("graph_reason: " + std::to_string(styles.regions()) + " style rows for " +
                std::to_string(graph.nodes()) + " graph nodes");
  }
  const Index channels = styles.channels();
  for (const auto& w : weights.w) {
    if (w.rows() != channels || w.cols() != channels) {
      throw Error("graph_reason: subset weights must be " + std::to_string(channels) + "x" + std::to_string(channels));
    }
  }

  const SubsetLabels labels = partition_neighbors(graph);
  MatrixXf out = MatrixXf::Zero(graph.nodes(), channels);
  std::vector<bool> present(static_cast<std::size_t>(graph.nodes()), false);

  for (int i = 0; i < graph.nodes(); ++i) {
    const auto& hood = graph.neighborhood(i);
    for (int subset = 0; subset < 3; ++subset) {
      Eigen::RowVectorXd subset_sum = Eigen::RowVectorXd::Zero(channels);
      int members = 0;
      for (int j : hood) {
        if (labels(i, j) != subset) continue;
        subset_sum += styles.codes.row(j).cast<double>();
        ++members;
        if (styles.present[static_cast<std::size_t>(j)]) present[static_cast<std::size_t>(i)] = true;
      }
      if (members == 0) continue;
      out.row(i) += ((subset_sum / members) * weights.w[static_cast<std::size_t>(subset)].cast<double>()).cast<float>();
    }
  }
  for (int i = 0; i < graph.nodes(); ++i) {
    if (!present[static_cast<std::size_t>(i)]) out.row(i).setZero();
  }
  return StyleCodeMatrix(std::move(out), std::move(present));
}

Tensor merge_styles(const StyleCodeMatrix& styles, const StyleCodeMatrix& reasoned, const OcclusionMask& occluded,
                    const SegmentationMap& seg) {
  if (styles.regions() != reasoned.regions() || styles.channels() != reasoned.channels()) {
    throw Error("merge_styles: style matrices differ in shape");
  }
  if (seg.num_labels() > styles.regions()) throw Error("merge_styles: segmentation labels exceed style rows");
  if (occluded.height() != seg.height() || occluded.width() != seg.width()) {
    throw Error("merge_styles: occlusion mask extent does not match segmentation");
  }
  Tensor out = Tensor::chw(styles.channels(), seg.height(), seg.width());
  auto m = out.as_matrix();
  for (Index p = 0; p < seg.labels().size(); ++p) {
    const auto& source = occluded.at(p) ? reasoned.codes : styles.codes;
    m.col(p) = source.row(seg.at(p)).transpose();
  }
  return out;
}

}  // namespace glocal
