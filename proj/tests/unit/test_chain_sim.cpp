#include <cmath>

#include "common.hpp"
#include "treepot/chain_sim.hpp"
#include "treepot/error.hpp"

using namespace treepot;

TEST_CASE("absorption and classification on the binary homogeneous tree") {
  auto s = testing::fixture("homog2.json");
  auto g = absorption_probability(s.tree, s.weights, {}, default_schedule(), 1e-6);
  CHECK(g.converged);
  CHECK(g.lower <= 0.4 + 1e-12);
  CHECK(g.upper >= 0.4 - 1e-12);
  CHECK(g.width() <= 1e-6);
  auto g1 = absorption_probability(s.tree, s.weights, {1}, default_schedule(), 1e-6);
  CHECK(g1.mid() == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(classify_transience(s.tree, s.weights, default_schedule(), 1e-8).status ==
        Classification::Status::transient);
}

TEST_CASE("single ray: recurrent with linear weights, transient when bounded") {
  auto s = testing::fixture("single_ray.json");
  auto c = classify_transience(s.tree, s.weights, default_schedule(), 1e-8);
  CHECK(c.status == Classification::Status::recurrent);
  auto b = std::make_shared<const WeightSequence>(WeightSequence::bounded(2.0, 1.0, 0.5));
  auto cb = classify_transience(s.tree, b, default_schedule(), 1e-8);
  CHECK(cb.status == Classification::Status::transient);
}

TEST_CASE("hitting probabilities") {
  auto s = testing::fixture("homog2.json");
  auto sched = default_schedule();
  for (auto [i, j] : std::vector<std::pair<Path, Path>>{{{0}, {1}}, {{0, 1}, {2}}, {{}, {1, 1, 1}}, {{2, 0}, {2, 1}}}) {
    const int d = static_cast<int>(i.size() + j.size()) - 2 * common_prefix(i, j);
    auto h = hitting_probability(s.tree, s.weights, RootMode::reflected, i, j, sched, 1e-9);
    CHECK(h.mid() == doctest::Approx(std::pow(2.0, -d)).epsilon(1e-8));
  }
  CHECK(hitting_probability(s.tree, s.weights, RootMode::reflected, {1}, {1}, sched, 1e-9).mid() == 1.0);
  auto q = hitting_probability(s.tree, s.weights, RootMode::absorbed, {}, {2}, sched, 1e-9);
  CHECK(q.mid() == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("chain simulation first steps") {
  auto f1 = testing::fixture("f1.json");
  ChainCaps caps;
  caps.max_level = 8;
  double hold = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    auto t = simulate_chain(*f1.tree, *f1.weights, RootMode::absorbed, {0, 0}, 3, k, caps);
    REQUIRE(t.nodes.size() >= 2);
    CHECK(t.nodes[1] == Path{0});
    hold += t.holding[0];
  }
  // exp(1/2) holding time: mean 2, sd 2
  CHECK(std::abs(hold / n - 2.0) < 4.0 * 2.0 / std::sqrt(n));

  auto h = testing::fixture("homog2.json");
  int counts[4] = {0, 0, 0, 0};
  const int m = 40000;
  for (int k = 0; k < m; ++k) {
    auto t = simulate_chain(*h.tree, *h.weights, RootMode::absorbed, {}, 9, k, caps);
    if (t.nodes.size() < 2) {
      CHECK(t.status == Trajectory::Status::absorbed);
      ++counts[3];
    } else {
      ++counts[t.nodes[1][0]];
    }
  }
  for (int c : counts) CHECK(std::abs(c / double(m) - 0.25) < 4.0 * std::sqrt(0.25 * 0.75 / m));

  for (int k = 0; k < 200; ++k)
    CHECK(simulate_chain(*h.tree, *h.weights, RootMode::reflected, {}, 4, k, caps).status !=
          Trajectory::Status::absorbed);
}

TEST_CASE("deterministic replay") {
  auto h = testing::fixture("homog2.json");
  ChainCaps caps;
  auto a = simulate_chain(*h.tree, *h.weights, RootMode::absorbed, {}, 77, 5, caps);
  auto b = simulate_chain(*h.tree, *h.weights, RootMode::absorbed, {}, 77, 5, caps);
  CHECK(a.nodes == b.nodes);
  CHECK(a.holding == b.holding);
}
