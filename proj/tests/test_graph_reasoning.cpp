#include "glocal/graph_reasoning.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace glocal;

namespace {

std::array<Eigen::MatrixXd, 3> as_double(const SubsetWeights& w) {
  return {w.w[0].cast<double>(), w.w[1].cast<double>(), w.w[2].cast<double>()};
}

oracle::GraphProblem problem_of(int n, const EdgeList& edges, const Eigen::MatrixX2d& anchors,
                                const std::vector<bool>& present) {
  return {n, edges, anchors, present};
}

SubsetWeights random_weights(Rng& rng, Index c) {
  return {{rng.uniform_matrix(c, c), rng.uniform_matrix(c, c), rng.uniform_matrix(c, c)}};
}

}  // namespace

TEST_CASE("default body edges") {
  const EdgeList expected{{1, 2}, {2, 3}, {3, 5}, {3, 4}, {4, 6}, {6, 7}};
  CHECK(default_body_edges() == expected);
}

TEST_CASE("body graph construction") {
  Eigen::MatrixX2d anchors(3, 2);
  anchors << 0, 0, 4, 0, 99, 99;
  const BodyGraph g(3, {{1, 0}, {0, 1}, {2, 2}}, anchors, {true, true, false});
  CHECK(g.edges() == EdgeList{{0, 1}});
  CHECK(g.neighborhood(0) == std::vector<int>{0, 1});
  CHECK(g.neighborhood(2) == std::vector<int>{2});
  CHECK(g.adjacent(1, 0));
  CHECK_FALSE(g.adjacent(0, 2));
  CHECK(g.gravity_center().isApprox(Eigen::Vector2d(2, 0)));
  // Absent node sits at the gravity centre.
  CHECK(g.centrifugal()[2] == 0.0);
  CHECK(g.centrifugal()[0] == doctest::Approx(2.0));
  CHECK(g.tie_tolerance() == doctest::Approx(2e-3));
  CHECK_THROWS_AS(BodyGraph(3, {{0, 3}}, anchors, {true, true, true}), Error);
}

TEST_CASE("build_body_graph single pixel region") {
  const SegmentationMap seg(1, 1, 1, 0);
  const BodyGraph g = build_body_graph(seg, {});
  CHECK(g.anchors()(0, 0) == 0.0);
  CHECK(g.anchors()(0, 1) == 0.0);
  CHECK(g.centrifugal()[0] == 0.0);
}

TEST_CASE("build_body_graph centroids match pixel-list means") {
  LabelImage labels(3, 4);
  labels << 0, 0, 1, 1,  //
      0, 2, 1, 1,        //
      2, 2, 2, 1;
  const BodyGraph g = build_body_graph(SegmentationMap(labels, 3), {{0, 1}, {1, 2}});
  const double c0x = (0 + 1 + 0) / 3.0, c0y = (0 + 0 + 1) / 3.0;
  const double c1x = (2 + 3 + 2 + 3 + 3) / 5.0, c1y = (0 + 0 + 1 + 1 + 2) / 5.0;
  const double c2x = (1 + 0 + 1 + 2) / 4.0, c2y = (1 + 2 + 2 + 2) / 4.0;
  CHECK(g.anchors()(0, 0) == doctest::Approx(c0x));
  CHECK(g.anchors()(0, 1) == doctest::Approx(c0y));
  CHECK(g.anchors()(1, 0) == doctest::Approx(c1x));
  CHECK(g.anchors()(1, 1) == doctest::Approx(c1y));
  CHECK(g.anchors()(2, 0) == doctest::Approx(c2x));
  CHECK(g.anchors()(2, 1) == doctest::Approx(c2y));
  CHECK(g.gravity_center().x() == doctest::Approx((c0x + c1x + c2x) / 3));
  CHECK_THROWS_AS(build_body_graph(SegmentationMap(labels, 3), {{0, 5}}), Error);
}

TEST_CASE("symmetric regions tie") {
  LabelImage labels(1, 5);
  labels << 1, 0, 0, 0, 2;
  const BodyGraph g = build_body_graph(SegmentationMap(labels, 3), {{1, 2}});
  const SubsetLabels r = partition_neighbors(g);
  CHECK(g.centrifugal()[1] == doctest::Approx(g.centrifugal()[2]));
  CHECK(r(1, 2) == 0);
  CHECK(r(2, 1) == 0);
}

TEST_CASE("partition labels by centrifugal distance") {
  Eigen::MatrixX2d anchors(3, 2);
  anchors << 0, 0, 10, 0, -1, 0;
  const BodyGraph g(3, {{0, 1}, {0, 2}}, anchors, {true, true, true});
  const SubsetLabels r = partition_neighbors(g);
  // Gravity centre is x = 3: e = {3, 7, 4}.
  CHECK(r(0, 0) == 0);
  CHECK(r(0, 1) == 2);
  CHECK(r(1, 0) == 1);
  CHECK(r(0, 2) == 2);
  CHECK(r(2, 0) == 1);
  CHECK(r(1, 2) == -1);
}

TEST_CASE("partition labels are antisymmetric outside the tie band") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(6));
    Eigen::MatrixX2d anchors(n, 2);
    for (int i = 0; i < n; ++i) anchors.row(i) << rng.uniform(0, 30), rng.uniform(0, 30);
    EdgeList edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.below(2)) edges.emplace_back(a, b);
    const BodyGraph g(n, edges, anchors, std::vector<bool>(std::size_t(n), true));
    const SubsetLabels r = partition_neighbors(g);
    for (auto [a, b] : g.edges()) {
      if (r(a, b) == 1) CHECK(r(b, a) == 2);
      if (r(a, b) == 2) CHECK(r(b, a) == 1);
      if (r(a, b) == 0) CHECK(r(b, a) == 0);
    }
  }
}

TEST_CASE("isolated node with identity weight is unchanged") {
  Eigen::MatrixX2d anchors(1, 2);
  anchors << 3, 4;
  const BodyGraph g(1, {}, anchors, {true});
  const StyleCodeMatrix st((MatrixXf(1, 3) << 1, -2, 5).finished(), {true});
  CHECK(graph_reason(st, g, SubsetWeights::identity(3)).codes == st.codes);
}

TEST_CASE("zero weights annihilate") {
  Rng rng(22);
  Eigen::MatrixX2d anchors = Eigen::MatrixX2d::Random(4, 2);
  const BodyGraph g(4, {{0, 1}, {1, 2}, {2, 3}}, anchors, std::vector<bool>(4, true));
  const StyleCodeMatrix st(rng.uniform_matrix(4, 3), std::vector<bool>(4, true));
  const MatrixXf z = MatrixXf::Zero(3, 3);
  CHECK(graph_reason(st, g, SubsetWeights{{z, z, z}}).codes.isZero(0));
}

TEST_CASE("path graph matches the dense propagation oracle") {
  Eigen::MatrixX2d anchors(3, 2);
  anchors << 0, 0, 5, 1, 13, 2;
  const EdgeList edges{{0, 1}, {1, 2}};
  const BodyGraph g(3, edges, anchors, {true, true, true});
  Rng rng(23);
  const StyleCodeMatrix st(rng.uniform_matrix(3, 4), {true, true, true});

  const SubsetWeights eye = SubsetWeights::identity(4);
  const Eigen::MatrixXd expected =
      oracle::propagate(problem_of(3, edges, anchors, {true, true, true}), st.codes.cast<double>(), as_double(eye));
  CHECK((graph_reason(st, g, eye).codes.cast<double>() - expected).cwiseAbs().maxCoeff() <= 1e-6);

  const SubsetWeights w = random_weights(rng, 4);
  const Eigen::MatrixXd expected_w =
      oracle::propagate(problem_of(3, edges, anchors, {true, true, true}), st.codes.cast<double>(), as_double(w));
  CHECK((graph_reason(st, g, w).codes.cast<double>() - expected_w).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("absent regions are filled from present neighbours") {
  Eigen::MatrixX2d anchors(3, 2);
  anchors << 0, 0, 6, 0, 50, 50;
  const EdgeList edges{{0, 1}, {1, 2}};
  const std::vector<bool> present{true, true, false};
  MatrixXf codes(3, 2);
  codes << 1, 2, 3, 4, 0, 0;
  const StyleCodeMatrix st(codes, present);
  Rng rng(24);
  const SubsetWeights w = random_weights(rng, 2);
  const StyleCodeMatrix out = graph_reason(st, BodyGraph(3, edges, anchors, present), w);
  CHECK(out.present == std::vector<bool>{true, true, true});
  const Eigen::MatrixXd expected = oracle::propagate(problem_of(3, edges, anchors, present), codes.cast<double>(), as_double(w));
  CHECK((out.codes.cast<double>() - expected).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK_FALSE(out.codes.row(2).isZero(0));
}

TEST_CASE("graph_reason is linear in the styles") {
  Rng rng(25);
  const int n = 8;
  Eigen::MatrixX2d anchors(n, 2);
  for (int i = 0; i < n; ++i) anchors.row(i) << rng.uniform(0, 24), rng.uniform(0, 32);
  const std::vector<bool> all(n, true);
  const BodyGraph g(n, default_body_edges(), anchors, all);
  const SubsetWeights w = random_weights(rng, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const StyleCodeMatrix a(rng.uniform_matrix(n, 5), all), b(rng.uniform_matrix(n, 5), all);
    const float s = rng.uniform(-2, 2), t = rng.uniform(-2, 2);
    const MatrixXf lhs = graph_reason(StyleCodeMatrix(s * a.codes + t * b.codes, all), g, w).codes;
    const MatrixXf rhs = s * graph_reason(a, g, w).codes + t * graph_reason(b, g, w).codes;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("equal styles with identity weights give k_i times the style") {
  Rng rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    Eigen::MatrixX2d anchors(n, 2);
    for (int i = 0; i < n; ++i) anchors.row(i) << rng.uniform(0, 24), rng.uniform(0, 32);
    EdgeList edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.below(3) == 0) edges.emplace_back(a, b);
    const std::vector<bool> all(std::size_t(n), true);
    const BodyGraph g(n, edges, anchors, all);
    const Eigen::RowVectorXf s = rng.uniform_matrix(1, 3);
    const MatrixXf out = graph_reason(StyleCodeMatrix(s.replicate(n, 1), all), g, SubsetWeights::identity(3)).codes;
    const std::vector<int> labels = oracle::subset_labels(problem_of(n, edges, anchors, all));
    for (int i = 0; i < n; ++i) {
      bool seen[3] = {false, false, false};
      for (int j = 0; j < n; ++j) {
        const int l = labels[std::size_t(i * n + j)];
        if (l >= 0) seen[l] = true;
      }
      const float k = float(seen[0] + seen[1] + seen[2]);
      CHECK(out.row(i) == k * s);
    }
  }
}

TEST_CASE("perturbing a non-neighbour leaves a row unchanged") {
  Rng rng(27);
  const int n = 8;
  Eigen::MatrixX2d anchors(n, 2);
  for (int i = 0; i < n; ++i) anchors.row(i) << rng.uniform(0, 24), rng.uniform(0, 32);
  const std::vector<bool> all(n, true);
  const BodyGraph g(n, default_body_edges(), anchors, all);
  const SubsetWeights w = random_weights(rng, 4);
  const StyleCodeMatrix base(rng.uniform_matrix(n, 4), all);
  const MatrixXf before = graph_reason(base, g, w).codes;
  for (int j = 0; j < n; ++j) {
    StyleCodeMatrix poked = base;
    poked.codes.row(j) += rng.uniform_matrix(1, 4, 1, 5);
    const MatrixXf after = graph_reason(poked, g, w).codes;
    for (int i = 0; i < n; ++i) {
      const auto& hood = g.neighborhood(i);
      if (std::find(hood.begin(), hood.end(), j) == hood.end()) CHECK(after.row(i) == before.row(i));
    }
  }
}

TEST_CASE("graph_reason dimension checks") {
  Eigen::MatrixX2d anchors = Eigen::MatrixX2d::Zero(2, 2);
  const BodyGraph g(2, {{0, 1}}, anchors, {true, true});
  const StyleCodeMatrix st(MatrixXf::Ones(2, 3), {true, true});
  CHECK_THROWS_AS(graph_reason(st, g, SubsetWeights::identity(4)), Error);
  CHECK_THROWS_AS(graph_reason(StyleCodeMatrix(MatrixXf::Ones(3, 3), {true, true, true}), g, SubsetWeights::identity(3)),
                  Error);
}

TEST_CASE("merge_styles selects per pixel") {
  Rng rng(28);
  const SegmentationMap seg = testing_support::random_segmentation(rng, 5, 6, 3);
  const std::vector<bool> all(3, true);
  const StyleCodeMatrix st(rng.uniform_matrix(3, 2), all), oc(rng.uniform_matrix(3, 2), all);

  CHECK(merge_styles(st, oc, OcclusionMask(5, 6), seg).bit_equal(broadcast_styles(st, seg)));
  CHECK(merge_styles(st, oc, OcclusionMask(FlagImage::Ones(5, 6)), seg).bit_equal(broadcast_styles(oc, seg)));

  OcclusionMask mixed(5, 6);
  for (Index y = 0; y < 5; ++y)
    for (Index x = 0; x < 6; ++x) mixed.set(y, x, rng.below(2) == 1);
  const Tensor out = merge_styles(st, oc, mixed, seg);
  for (Index y = 0; y < 5; ++y)
    for (Index x = 0; x < 6; ++x)
      for (Index c = 0; c < 2; ++c) CHECK(out(c, y, x) == (mixed(y, x) ? oc.codes : st.codes)(seg(y, x), c));
  CHECK_THROWS_AS(merge_styles(st, oc, OcclusionMask(4, 6), seg), Error);
}
