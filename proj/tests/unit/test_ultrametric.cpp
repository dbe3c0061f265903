#include <Eigen/Dense>

#include "common.hpp"
#include "treepot/error.hpp"
#include "treepot/ultrametric.hpp"

using namespace treepot;

namespace {
Eigen::MatrixXd F4() {
  Eigen::MatrixXd U(3, 3);
  U << 1, 1, 1, 1, 2, 1, 1, 1, 3;
  return U;
}
}  // namespace

TEST_CASE("ultrametric checks") {
  CHECK(verify_ultrametric(F4()).ok);
  Eigen::MatrixXd bad(3, 3);
  bad << 1, .3, .5, .3, 1, .4, .5, .4, 1;
  auto r = verify_ultrametric(bad);
  CHECK(!r.ok);
  CHECK(r.i == 0);
  CHECK(r.j == 1);
  CHECK(r.k == 2);
  Eigen::MatrixXd two(2, 2);
  two << 3, 1, 1, 1.5;
  CHECK(verify_ultrametric(two).ok);
  two(1, 1) = 0.5;  // diagonal below the row
  CHECK(verify_ultrametric(two).reason == "diagonal");
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 1, 1;
  CHECK_THROWS_AS(verify_ultrametric(asym), Error);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  CHECK(!check_hypotheses(ones).h1);
  auto h = check_hypotheses(F4());
  CHECK(h.h1);
  CHECK(h.h2);
  CHECK(h.h3);
  CHECK(h.h4 == "certified");
}

TEST_CASE("F4 tree extension") {
  auto e = minimal_tree_extension(F4());
  REQUIRE(e.size() == 4);
  CHECK(e.embed[0] == 0);
  CHECK(e.value[0] == 1.0);
  CHECK(e.cls[0] == std::vector<int>{0, 1, 2});
  CHECK(e.value[e.embed[1]] == 2.0);
  CHECK(e.value[e.embed[2]] == 3.0);
  const int added = e.parent[e.embed[2]];
  CHECK(e.added(added));
  CHECK(e.value[added] == 2.0);
  CHECK(e.cls[added] == std::vector<int>{2});
  CHECK((e.restricted().array() == F4().array()).all());
  CHECK(u_neighbors(e, 0) == std::vector<int>{1, 2});
  CHECK(u_neighbors(e, 1) == std::vector<int>{0});
  CHECK(u_neighbors(e, 2) == std::vector<int>{0});
  auto basin = attraction_basin(e, 2);
  CHECK(std::find(basin.begin(), basin.end(), added) != basin.end());

  Eigen::MatrixXd pair(2, 2);
  pair << 1, 1, 1, 2;
  auto ep = minimal_tree_extension(pair);
  CHECK(ep.size() == 2);
  CHECK(ep.parent[ep.embed[1]] == ep.embed[0]);
}

TEST_CASE("F4 generator and harmonic extension") {
  auto U = F4();
  auto e = minimal_tree_extension(U);
  auto g = ultrametric_generator(e, U);
  Eigen::MatrixXd mq(3, 3);
  mq << 2.5, -1, -0.5, -1, 1, 0, -0.5, 0, 0.5;
  CHECK((-g.Q - mq).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(g.asymmetry == 0.0);
  CHECK(g.Q(1, 2) == 0.0);
  CHECK(g.support_ok);
  CHECK(g.certified);
  CHECK(g.inverse_residual <= 1e-14);
  const int added = e.parent[e.embed[2]];
  auto& hit = g.hitting.at(added);
  REQUIRE(hit.size() == 2);
  for (auto& [j, p] : hit) CHECK(p == doctest::Approx(0.5));

  Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  auto hz = extend_harmonic(e, g, zero);
  for (double v : hz.values) CHECK(v == 0.0);
  Eigen::Vector3d x(0.7, 0.0, 1.9);
  auto hx = extend_harmonic(e, g, x, false);
  CHECK(hx.values[added] == doctest::Approx((0.7 + 1.9) / 2));
  CHECK(hx.tree_residual <= 1e-15);

  Eigen::MatrixXd pair(2, 2);
  pair << 1, 1, 1, 2;
  auto gp = ultrametric_generator(minimal_tree_extension(pair), pair);
  Eigen::Matrix2d expect;
  expect << 2, -1, -1, 1;
  CHECK((-gp.Q - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("random dendrograms") {
  Rng rng(11, 0);
  for (int k = 0; k < 20; ++k) {
    auto U = random_dendrogram(rng, 40);
    CHECK(verify_ultrametric(U).ok);
    auto e = minimal_tree_extension(U);
    CHECK((e.restricted().array() == U.array()).all());
    auto g = ultrametric_generator(e, U);
    CHECK(g.inverse_residual <= 1e-10);
    CHECK(g.support_ok);
  }
}

TEST_CASE("word families") {
  auto e1 = testing::fixture("ex1.json");
  REQUIRE(e1.words);
  auto b1 = u_boundary(*e1.words, 2, {8, 16, 32, 64}, 1e-6);
  CHECK(!b1.empty_flag);
  CHECK(b1.h4.status == "certified");
  REQUIRE(b1.i_free_mass.size() == 4);
  CHECK(b1.i_free_mass[3].second < b1.i_free_mass[2].second);
  CHECK(b1.i_free_mass[2].second < b1.i_free_mass[0].second);
  CHECK(b1.lemma_consistent);
  auto e2 = testing::fixture("ex2.json");
  auto b2 = u_boundary(*e2.words, 2, {8, 16, 32}, 1e-6);
  CHECK(b2.empty_flag);
  CHECK(b2.structural_empty);
  CHECK(b2.boundary_mass == 0.0);
  CHECK(!b2.note.empty());
  CHECK(e1.words->contains({0, 2, 1}));
  CHECK(!e2.words->contains({1, 2, 1}));
}
