#pragma once

#include "glocal/region_style.hpp"
#include "glocal/tensor.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace glocal {

using Edge = std::pair<int, int>;
using EdgeList = std::vector<Edge>;

/// Anatomical adjacency for the 8-region layout
/// {background, hair, face, upper-clothes, pants, skin/arms, legs, shoes}.
EdgeList default_body_edges();

/// Region graph with one node per label. Self loops are implicit.
class BodyGraph {
 public:
  /// Anchors are N x 2 (x, y) pixel coordinates. `present` marks nodes whose
  /// anchor is real; the gravity center averages those only.
  BodyGraph(int nodes, const EdgeList& edges, Eigen::MatrixX2d anchors, std::vector<bool> present);

  int nodes() const { return nodes_; }
  const EdgeList& edges() const { return edges_; }
  const Eigen::MatrixX2d& anchors() const { return anchors_; }
  const Eigen::Vector2d& gravity_center() const { return gravity_center_; }
  /// Distance from the gravity center to each anchor.
  const Eigen::VectorXd& centrifugal() const { return centrifugal_; }
  /// Absolute tolerance under which two centrifugal distances are equal.
  double tie_tolerance() const { return tie_tolerance_; }

  /// Self followed by the adjacent nodes in increasing order.
  const std::vector<int>& neighborhood(int node) const { return neighborhoods_.at(static_cast<std::size_t>(node)); }
  bool adjacent(int a, int b) const;

 private:
  int nodes_;
  EdgeList edges_;
  Eigen::MatrixX2d anchors_;
  Eigen::Vector2d gravity_center_;
  Eigen::VectorXd centrifugal_;
  double tie_tolerance_ = 0.0;
  std::vector<std::vector<int>> neighborhoods_;
};

/// Relative tie tolerance applied to the largest centrifugal distance.
inline constexpr double kRelativeTieTolerance = 1e-3;

/// Anchors are region centroids; absent regions sit at the gravity center.
BodyGraph build_body_graph(const SegmentationMap& seg, const EdgeList& edges);

/// r_i(v_j): 0 = same distance, 1 = closer to the center, 2 = farther, -1 = not in B(v_i).
using SubsetLabels = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
SubsetLabels partition_neighbors(const BodyGraph& graph);

/// One C x C weight per subset label.
struct SubsetWeights {
  std::array<MatrixXf, 3> w;

  static SubsetWeights identity(Index channels);
  Index channels() const { return w[0].rows(); }
};

/// Normalized spatial graph convolution over the style rows:
///   out_i = sum_{j in B(i)} ST_j * w[r_i(j)] / Z_i(j),
/// where Z_i(j) counts the members of B(i) sharing j's subset label.
/// A row is marked present when any member of its neighborhood is present.
StyleCodeMatrix graph_reason(const StyleCodeMatrix& styles, const BodyGraph& graph, const SubsetWeights& weights);

/// Per-pixel selection: reasoned row where occluded, plain row otherwise.
Tensor merge_styles(const StyleCodeMatrix& styles, const StyleCodeMatrix& reasoned, const OcclusionMask& occluded,
                    const SegmentationMap& seg);

}  // namespace glocal
