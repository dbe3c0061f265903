#include <cmath>

#include "common.hpp"
#include "treepot/boundary_measure.hpp"
#include "treepot/error.hpp"

using namespace treepot;

namespace {
ExitMeasure homog(const char* name, RootMode mode, int res = 4) {
  auto s = testing::fixture(name);
  return exit_measure(s.tree, s.weights, res, default_schedule(), 1e-12, mode);
}
}  // namespace

TEST_CASE("homogeneous cylinder masses in both modes") {
  for (auto mode : {RootMode::absorbed, RootMode::reflected})
    for (const char* name : {"homog2.json", "homog3.json"}) {
      auto mu = homog(name, mode);
      const double p = name[5] - '0';
      for (int k = 1; k <= 4; ++k)
        CHECK(mu.mass(Path(k, 1)) == doctest::Approx(1.0 / ((p + 1) * std::pow(p, k - 1))).epsilon(1e-10));
      double total = 0.0;
      for (auto& a : mu.atoms(1)) total += mu.mass(a);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("G process on the binary homogeneous tree") {
  auto mu = homog("homog2.json", RootMode::absorbed);
  const Path ray{0, 1, 0, 1};
  CHECK(G(mu, ray, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-10));
  CHECK(G(mu, ray, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(G(mu, ray, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK(G(mu, ray, 3) == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
  auto rf = homog("homog2.json", RootMode::reflected);
  CHECK(G(rf, ray, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-10));
  CHECK(rf.analysis().green_diag({}).mid() == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("conditional U") {
  auto mu = homog("homog2.json", RootMode::absorbed);
  CHECK(conditional_U(mu, {0}, {0, 0, 0}, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
  CHECK(conditional_U(mu, {0}, {0, 0, 0}, 1) == doctest::Approx(2.0).epsilon(1e-12));
  for (int k = 0; k < 3; ++k) CHECK(conditional_U(mu, {}, {1, 1, 1}, k) == doctest::Approx(1.0));
}

TEST_CASE("W operator and its inverse") {
  auto mu = homog("homog2.json", RootMode::absorbed);
  auto one = SimpleFn::constant(mu, 2, 1.0);
  for (auto& [a, v] : apply_W(mu, one).values) CHECK(v == doctest::Approx(5.0 / 3.0).epsilon(1e-10));
  for (auto& [a, v] : apply_W_inverse_simple(mu, one).values) CHECK(v == doctest::Approx(0.6).epsilon(1e-10));

  auto ind = SimpleFn::indicator(mu, 1, {2});
  auto w = apply_W(mu, ind);
  auto wm = apply_W_martingale(mu, ind);
  double mass_w = 0.0;
  for (auto& [a, v] : w.values) {
    CHECK(v == doctest::Approx(wm.at(a)).epsilon(1e-12));
    mass_w += v * mu.mass(a);
  }
  CHECK(mass_w == doctest::Approx(5.0 / 3.0 / 3.0).epsilon(1e-10));
  for (auto& [a, v] : apply_W(mu, SimpleFn::constant(mu, 1, 0.0)).values) CHECK(v == 0.0);

  auto c2 = SimpleFn::indicator(mu, 2, {1, 0});
  auto back = apply_W(mu, apply_W_inverse_simple(mu, c2));
  for (auto& a : mu.atoms(2)) CHECK(std::abs(back.at(a) - c2.at(a)) <= 1e-10);

  CHECK(w_inverse_kernel(mu, {0, 0}, {1, 0}) == doctest::Approx(-0.9).epsilon(1e-10));
}

TEST_CASE("Dirichlet form") {
  auto mu = homog("homog2.json", RootMode::absorbed);
  auto c1 = SimpleFn::indicator(mu, 1, {0});
  auto one = SimpleFn::constant(mu, 1, 1.0);
  CHECK(dirichlet_form(mu, c1, one) == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(dirichlet_form_beurling_deny(mu, c1, one) == doctest::Approx(0.2).epsilon(1e-10));
  auto f = SimpleFn::indicator(mu, 2, {0, 1});
  auto g = SimpleFn::indicator(mu, 2, {2, 0});
  CHECK(dirichlet_form(mu, f, g) == doctest::Approx(dirichlet_form_beurling_deny(mu, f, g)).epsilon(1e-10));
  auto rf = homog("homog2.json", RootMode::reflected);
  CHECK(std::abs(dirichlet_form(rf, SimpleFn::constant(rf, 1, 1.0), SimpleFn::constant(rf, 1, 1.0), true)) <=
        1e-12);
}

TEST_CASE("ray regularity") {
  auto h = testing::fixture("homog2.json");
  auto rr = ray_regularity(h.tree, h.weights, {0, 1}, 40, 1e-6);
  CHECK(rr.status == RayReport::Status::regular);
  CHECK(rr.absorption[3].mid() == doctest::Approx(0.05).epsilon(1e-8));
  auto fig = testing::fixture("figure2.json");
  auto sp = ray_regularity(fig.tree, fig.weights, fig.ray, 40, 1e-6);
  CHECK(sp.status == RayReport::Status::irregular);
  CHECK(sp.accessible);
  // lower bound a / w0 with a the spine's absorption floor
  CHECK(sp.absorption.back().lo > 0.0);
}

TEST_CASE("inaccessible cylinders and recurrent chains") {
  auto s = testing::fixture("inaccessible.json");
  auto mu = exit_measure(s.tree, s.weights, 3, default_schedule(), 1e-12, RootMode::absorbed);
  auto comps = inaccessible_components(mu, 3);
  REQUIRE(comps.size() == 1);
  CHECK(comps[0] == Path{1});
  auto r = testing::fixture("single_ray.json");
  CHECK_THROWS_AS(exit_measure(r.tree, r.weights, 2, default_schedule(), 1e-10, RootMode::absorbed), Error);
}
