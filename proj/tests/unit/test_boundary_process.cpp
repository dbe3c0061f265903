#include <cmath>

#include "common.hpp"
#include "treepot/boundary_process.hpp"
#include "treepot/error.hpp"

using namespace treepot;

namespace {
BoundaryKernel kernel(RootMode mode, const char* name = "homog2.json") {
  auto s = testing::fixture(name);
  return BoundaryKernel(exit_measure(s.tree, s.weights, 5, default_schedule(), 1e-12, mode));
}
}  // namespace

TEST_CASE("kernel closed forms") {
  auto bk = kernel(RootMode::absorbed);
  const double g0 = bk.G({}, 0);
  for (double t : {0.1, 1.0, 3.0}) {
    const double m0 = std::exp(-t / g0) - std::exp(-1.5 * t);
    CHECK(kernel_p(bk, t, {0, 0}, {1, 0}) == doctest::Approx(m0).epsilon(1e-10));
    CHECK(kernel_p(bk, t, {0, 0}, {0, 1}) ==
          doctest::Approx(m0 + 3.0 * (std::exp(-1.5 * t) - std::exp(-3.0 * t))).epsilon(1e-10));
  }
  CHECK(kernel_p(bk, 1.0, {0, 0}, {1, 0}) == doctest::Approx(0.3256814759455966).epsilon(1e-10));
  CHECK(kernel_p(bk, 1.0, {0, 0}, {0, 1}) == doctest::Approx(0.8457107512872942).epsilon(1e-10));
  CHECK(kernel_p(bk, 1e-12, {0, 0}, {0, 1}) < 1e-10);
}

TEST_CASE("Green identity") {
  auto bk = kernel(RootMode::absorbed);
  CHECK(green_integral(bk, {0, 0}, {0, 1}) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(green_integral(bk, {0, 0}, {1, 1}) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(green_identity_residual(bk, {0, 0, 1}, {0, 1, 1}) <= 1e-10);
  CHECK(std::abs(green_quadrature(bk, {0, 0}, {0, 1}) - green_integral(bk, {0, 0}, {0, 1})) <= 1e-8);
}

TEST_CASE("semigroup total mass") {
  auto bk = kernel(RootMode::absorbed);
  auto rf = kernel(RootMode::reflected);
  const double g0 = bk.G({}, 0);
  for (double t : {0.25, 1.0, 4.0}) {
    for (auto& [a, v] : semigroup_apply(bk, t, SimpleFn::constant(bk.measure(), 2, 1.0)).values)
      CHECK(std::abs(v - std::exp(-t / g0)) <= 1e-12);
    for (auto& [a, v] : semigroup_apply(rf, t, SimpleFn::constant(rf.measure(), 2, 1.0)).values)
      CHECK(std::abs(v - 1.0) <= 1e-12);
  }
  auto f = SimpleFn::indicator(bk.measure(), 2, {1, 0});
  auto p0 = semigroup_apply(bk, 0.0, f);
  for (auto& a : bk.measure().atoms(2)) CHECK(p0.at(a) == f.at(a));
}

TEST_CASE("exit rates") {
  auto bk = kernel(RootMode::absorbed);
  CHECK(exit_rate(bk, 0, {0, 0}) == doctest::Approx(0.6).epsilon(1e-10));
  const double b1 = exit_rate(bk, 1, {0, 0});
  CHECK(b1 == doctest::Approx(1.2).epsilon(1e-10));
  CHECK(0.6 < b1);
  CHECK(b1 < 1.5);
  CHECK(restricted_kernel_residual(bk, 0.7, {0, 0, 1}, {0, 1, 0}) <= 1e-10);
}

TEST_CASE("exponential split and merge") {
  Rng rng(1, 2);
  const int n = 1000000;
  double mean = 0.0, ones = 0.0;
  for (int k = 0; k < n; ++k) {
    const double g = rng.exponential(1.0);
    auto s = exp_split(g, 1.0, 2.0, rng);
    const double m = exp_merge(s);
    // one rounding step at most
    CHECK_MESSAGE(std::abs(m - g) <= 1e-15 * std::max(1.0, g), "split/merge mismatch");
    mean += m;
    ones += s.b;
  }
  CHECK(std::abs(mean / n - 1.0) < 0.01);
  CHECK(std::abs(ones / n - 0.5) < 0.01);
  Rng r2(3, 4);
  int b = 0;
  for (int k = 0; k < 10000; ++k) b += exp_split(r2.exponential(1.0), 1.0, 1e9, r2).b;
  CHECK(b >= 9990);
}

TEST_CASE("boundary simulation") {
  auto bk = kernel(RootMode::absorbed);
  auto a = simulate_boundary(bk, {0, 0, 0}, 3, INFINITY, 5, 17);
  auto b = simulate_boundary(bk, {0, 0, 0}, 3, INFINITY, 5, 17);
  CHECK(a.times == b.times);
  CHECK(a.rays == b.rays);
  CHECK(a.status == BoundaryPath::Status::killed);
  CHECK(a.at(-1.0) == nullptr);
  CHECK(a.at(a.end_time) == nullptr);
  CHECK(*a.at(0.0) == a.rays.front());

  auto rf = kernel(RootMode::reflected);
  CHECK_THROWS_AS(simulate_boundary(rf, {0}, 3, 1.0, 1, 0), Error);
  CHECK_THROWS_AS(simulate_boundary_reflected(rf, {0}, 3, INFINITY, 1, 0), Error);
  const int n = 20000;
  const double T = 2.0;
  double ren = 0.0;
  for (int k = 0; k < n; ++k) {
    auto p = simulate_boundary_reflected(rf, {}, 3, T, 8, k);
    CHECK(p.status == BoundaryPath::Status::horizon);
    ren += static_cast<double>(p.renewals);
  }
  // Poisson count with mean T/G1 = 3
  CHECK(std::abs(ren / n - 3.0) < 3.0 * std::sqrt(3.0 / n));
}

TEST_CASE("resolution consistency") {
  auto bk = kernel(RootMode::absorbed);
  const int n = 40000;
  int c3 = 0, c4 = 0;
  for (int k = 0; k < n; ++k) {
    const auto p3 = simulate_boundary(bk, {0, 0}, 2, INFINITY, 21, k);
    const auto p4 = simulate_boundary(bk, {0, 0}, 4, INFINITY, 22, k);
    const Path* r3 = p3.at(0.5);
    const Path* r4 = p4.at(0.5);
    if (r3 && (*r3)[0] == 0) ++c3;
    if (r4 && (*r4)[0] == 0) ++c4;
  }
  const double p = 0.5 * (c3 + c4) / n;
  CHECK(std::abs(c3 - c4) / double(n) < 4.0 * std::sqrt(2.0 * p * (1 - p) / n));
}

TEST_CASE("KS helpers") {
  CHECK(ks_critical(10000, 0.01) == doctest::Approx(1.628 / 100.0).epsilon(1e-3));
  std::vector<double> u;
  for (int k = 0; k < 1000; ++k) u.push_back((k + 0.5) / 1000.0);
  CHECK(ks_statistic(u, [](double x) { return x; }) == doctest::Approx(0.0005).epsilon(1e-9));
}
