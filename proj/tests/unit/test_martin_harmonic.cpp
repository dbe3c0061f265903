#include <cmath>

#include "common.hpp"
#include "treepot/error.hpp"
#include "treepot/martin_harmonic.hpp"

using namespace treepot;

namespace {
ExitMeasure measure(const char* name, RootMode mode, int res = 6) {
  auto s = testing::fixture(name);
  return exit_measure(s.tree, s.weights, res, default_schedule(), 1e-12, mode);
}
}  // namespace

TEST_CASE("Martin kernel closed forms") {
  auto rf = measure("homog2.json", RootMode::reflected);
  const Path ray(6, 0);
  CHECK(martin_kernel(rf, {0}, ray, KernelRoute::ratio).value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(martin_kernel(rf, {1, 0}, ray, KernelRoute::series).value == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(martin_kernel(rf, {0, 0, 1}, ray, KernelRoute::ratio).value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(martin_kernel(rf, {0, 0, 0}, ray, KernelRoute::series).value == doctest::Approx(8.0).epsilon(1e-8));
  auto ab = measure("homog2.json", RootMode::absorbed);
  CHECK(martin_kernel(ab, {0}, ray, KernelRoute::ratio).value == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(martin_kernel(ab, {0}, ray, KernelRoute::series).value == doctest::Approx(3.0).epsilon(1e-8));
  for (auto route : {KernelRoute::ratio, KernelRoute::series}) {
    CHECK(martin_kernel(ab, {}, ray, route).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(martin_kernel(rf, {}, ray, route).value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("series and ratio routes agree on the asymmetric tree") {
  auto s = testing::fixture("asym.json");
  for (auto mode : {RootMode::absorbed, RootMode::reflected}) {
    auto mu = exit_measure(s.tree, s.weights, 6, default_schedule(), 1e-12, mode);
    for (const Path& i : {Path{0, 1}, Path{1, 2}, Path{1, 0, 2}})
      CHECK(martin_kernel(mu, i, s.ray, KernelRoute::ratio).value ==
            doctest::Approx(martin_kernel(mu, i, s.ray, KernelRoute::series).value).epsilon(1e-9));
  }
}

TEST_CASE("recurrent kernel") {
  auto s = testing::fixture("single_ray.json");
  auto v = martin_kernel_recurrent(*s.weights, {0, 0}, {0, 0, 0, 0});
  CHECK(v.route == KernelRoute::recurrent);
  CHECK(v.value == doctest::Approx(3.0));
}

TEST_CASE("harmonic functions from simple boundary data") {
  auto mu = measure("homog2.json", RootMode::absorbed, 4);
  auto s = testing::fixture("homog2.json");
  auto h1 = harmonic_from_simple(mu, SimpleFn::constant(mu, 1, 1.0));
  CHECK(h1({}) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(h1({2}) == doctest::Approx(0.8).epsilon(1e-9));
  auto res = harmonic_residual(*s.tree, *s.weights, RootMode::absorbed, h1, 3);
  CHECK(res.max_residual <= 1e-10);
  auto hc = harmonic_from_simple(mu, SimpleFn::indicator(mu, 1, {0}));
  CHECK(hc({}) == doctest::Approx(0.2).epsilon(1e-9));
  auto h0 = harmonic_from_simple(mu, SimpleFn::constant(mu, 1, 0.0));
  CHECK(h0({1, 1}) == 0.0);
  CHECK(is_increasing(*s.tree, h1, 3));
  auto lm = harmonic_limit_measure(*s.tree, *s.weights, RootMode::absorbed, h1, 3);
  for (double t : lm.total) CHECK(t == doctest::Approx(h1({}) / s.weights->w(0)).epsilon(1e-9));
  for (double c : lm.consistency) CHECK(c <= 1e-10);
}

TEST_CASE("column harmonic function is a point mass") {
  auto s = testing::fixture("homog2.json");
  const Path ray{1, 0, 1, 1, 0, 0};
  auto h = harmonic_from_column(s.weights, ray);
  auto lm = harmonic_limit_measure(*s.tree, *s.weights, RootMode::absorbed, h, 4);
  for (int n = 0; n <= 4; ++n) {
    REQUIRE(lm.alpha[n].size() >= 1);
    double on = 0.0, off = 0.0;
    for (auto& [j, a] : lm.alpha[n]) (j == Path(ray.begin(), ray.begin() + n) ? on : off) += std::abs(a);
    CHECK(on == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(off <= 1e-12);
  }
  for (std::size_t n = 1; n < lm.variation.size(); ++n) CHECK(lm.variation[n] == doctest::Approx(1.0).epsilon(1e-10));
}
