#include <Eigen/Dense>

#include "common.hpp"
#include "treepot/acceptance.hpp"
#include "treepot/error.hpp"
#include "treepot/tree_matrix.hpp"

using namespace treepot;

namespace {
struct F1 {
  LoadedSpec s = testing::fixture("f1.json");
  RootedTree t{s.tree};
  NodeId r = 0, a = t.find({0}), b = t.find({1}), a1 = t.find({0, 0}), a2 = t.find({0, 1});
};
}  // namespace

TEST_CASE("F1 entries and generator") {
  F1 f;
  TreeMatrixView U(f.t, *f.s.weights);
  CHECK(U.entry(f.a1, f.a2) == 2.0);
  CHECK(U.entry(f.a1, f.b) == 1.0);
  auto g = build_generator(f.t, *f.s.weights, RootMode::absorbed, 2);
  Eigen::MatrixXd Q = g.dense(f.t);
  auto ix = [&](NodeId n) { return g.index.at(n); };
  CHECK(Q(ix(f.r), ix(f.r)) == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(Q(ix(f.r), ix(f.a)) == doctest::Approx(1.0));
  CHECK(Q(ix(f.r), ix(f.b)) == doctest::Approx(1.0));
  CHECK(Q(ix(f.a), ix(f.a)) == doctest::Approx(-2.0));
  CHECK(Q(ix(f.a), ix(f.a1)) == doctest::Approx(0.5));
  CHECK(Q(ix(f.a1), ix(f.a1)) == doctest::Approx(-0.5));
  CHECK(Q(ix(f.b), ix(f.b)) == doctest::Approx(-1.0));
  CHECK(g.row_sum(ix(f.a1), f.t) == 0.0);
}

TEST_CASE("homogeneous reflected generator rates") {
  auto s = testing::fixture("homog2.json");
  RootedTree t(s.tree);
  auto g = build_generator(t, *s.weights, RootMode::reflected, 3);
  Eigen::MatrixXd Q = g.dense(t);
  CHECK(Q(0, 0) == doctest::Approx(-3.0));
  const NodeId i = t.find({1, 0});
  CHECK(Q(g.index.at(i), g.index.at(i)) == doctest::Approx(-3.0));
  CHECK(Q(g.index.at(i), g.index.at(t.find({1, 0, 1}))) == doctest::Approx(1.0));
}

TEST_CASE("inverse identity and perturbation detector") {
  F1 f;
  CHECK(inverse_residual(f.t, *f.s.weights, window_nodes(f.t, 2)) <= 1e-12);
  auto h = testing::fixture("homog2.json");
  RootedTree t(h.tree);
  CHECK(inverse_residual(t, *h.weights, window_nodes(t, 3)) <= 1e-12);
  // Q from the true weights against U from perturbed ones
  auto bad = f.s.weights->perturbed(1, f.s.weights->w(1) + 0.1);
  auto g = build_generator(f.t, *f.s.weights, RootMode::absorbed, 2);
  Eigen::MatrixXd Q = g.dense(f.t);
  Eigen::MatrixXd U = u_block(f.t, bad, g.nodes, g.nodes).m;
  const double res = ((-Q) * U - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff();
  CHECK(res > 0.01);
}

TEST_CASE("F1 finite potential and decomposition") {
  F1 f;
  auto V1 = finite_potential(f.t, *f.s.weights, 1);
  REQUIRE(V1.rows == std::vector<NodeId>{f.r, f.a, f.b});
  Eigen::Matrix3d expect;
  expect << 2, 1, 2, 1, 2, 1, 2, 1, 5;
  CHECK((3.0 * V1.m - expect).cwiseAbs().maxCoeff() <= 1e-14);
  auto V2 = finite_potential(f.t, *f.s.weights, 2);
  auto U = u_block(f.t, *f.s.weights, V2.rows, V2.cols);
  CHECK((V2.m - U.m).cwiseAbs().maxCoeff() <= 1e-14);
  // monotone in n
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(V1.m(i, j) <= V2.m(i, j) + 1e-15);

  auto hd = harmonic_decomposition(f.t, *f.s.weights, 1);
  Eigen::Matrix3d H;
  H << 1, 2, 1, 2, 4, 2, 1, 2, 1;
  CHECK((3.0 * hd.H.m - H).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(hd.rank == 1);
  CHECK(hd.boundary == std::vector<NodeId>{f.a});
  CHECK(hd.harmonic_residual <= 1e-14);

  auto hm = hitting_matrices(f.t, *f.s.weights, 1);
  // hitting probabilities of a before killing, from the dense oracle
  REQUIRE(hm.W.m.cols() == 1);
  CHECK(hm.W.m(0, 0) == doctest::Approx(0.5));
  CHECK(hm.W.m(1, 0) == doctest::Approx(1.0));
  CHECK(hm.W.m(2, 0) == doctest::Approx(0.5));
  CHECK(hm.reconstruction_residual <= 1e-14);
  CHECK((hm.D.m.rowwise().sum() - hm.E.m.rowwise().sum()).cwiseAbs().maxCoeff() == 0.0);

  auto full = harmonic_decomposition(f.t, *f.s.weights, 2);
  CHECK(full.H.m.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("elimination agrees with the dense oracle on random trees") {
  Rng rng(5, 0);
  for (int k = 0; k < 10; ++k) {
    auto rt = random_finite_tree(rng, 60);
    RootedTree t(rt.spec);
    const int D = rt.spec->depth();
    auto V = finite_potential(t, *rt.w, D);
    auto O = finite_potential_dense(t, *rt.w, D);
    CHECK((V.m - O.m).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("bounded weights give a finite ray diagonal") {
  auto w = WeightSequence::bounded(2.0, 1.0, 0.5);  // w_n = 2 - 2^-n
  RootedTree t(std::make_shared<const TreeSpec>(TreeSpec::by_level({}, 1)));
  TreeMatrixView U(t, w);
  CHECK(U.entry(Path{0, 0, 0}, Path{0, 0, 0}) == 2.0);
}
