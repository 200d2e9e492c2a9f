#include <cmath>
#include <numbers>
#include <random>

#include "decaylab/errors.hpp"
#include "decaylab/lorentz.hpp"
#include "doctest.h"

using namespace decaylab;

namespace {

Exponent E(double p) { return Exponent::finite(p); }
const Exponent kInf = Exponent::infinity();
LorentzExponents LE(Exponent p, Exponent s) { return LorentzExponents::make(p, s); }

GridPtr uniform(int n, double r_max, int cells) {
  std::vector<double> nodes(cells + 1);
  for (int i = 0; i <= cells; ++i) nodes[i] = r_max * i / cells;
  return RadialGrid::from_nodes(n, nodes);
}

// Ball of radius R represented on a grid whose last node is R.
RadialFunction ball(int n, double R, double value = 1.0) {
  return RadialFunction::indicator(uniform(n, R, 4), 0.0, R, value);
}

// Independent oracle: composite Simpson on a very fine uniform subdivision of each cell.
double lp_oracle(const RadialFunction& f, double p) {
  const auto& g = f.grid();
  const int n = g.dimension();
  double total = 0.0;
  for (std::size_t i = 0; i < f.cells(); ++i) {
    const double a = g.r(i), b = g.r(i + 1), la = f.left(i), lb = f.right(i);
    auto val = [&](double r) {
      const double v = la + (r - a) / (b - a) * (lb - la);
      return std::pow(std::fabs(v), p) * std::pow(r, n - 1);
    };
    auto simpson = [&](double lo, double hi) {
      const int m = 2000;
      const double h = (hi - lo) / m;
      double s = val(lo) + val(hi);
      for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * val(lo + k * h);
      return s * h / 3.0;
    };
    if (la * lb < 0.0) {
      const double z = a + la / (la - lb) * (b - a);
      total += simpson(a, z) + simpson(z, b);
    } else {
      total += simpson(a, b);
    }
  }
  return std::pow(n * g.ball_volume() * total, 1.0 / p);
}

RadialFunction random_profile(std::mt19937& rng, int n, bool signed_values, bool monotone) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int cells = 5 + static_cast<int>(u(rng) * 30);
  std::vector<double> nodes{0.0};
  for (int i = 0; i < cells; ++i) nodes.push_back(nodes.back() + 0.05 + u(rng));
  std::vector<double> v(nodes.size());
  double level = 1.0 + 2.0 * u(rng);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (monotone) {
      v[i] = level;
      level *= 0.3 + 0.7 * u(rng);
    } else {
      v[i] = signed_values ? 4.0 * u(rng) - 2.0 : 3.0 * u(rng);
    }
  }
  v.back() = 0.0;
  return RadialFunction::from_nodal(RadialGrid::from_nodes(n, nodes), v);
}

}  // namespace

TEST_CASE("grid construction") {
  auto g = RadialGrid::make(3, GridSpacing{}, 200.0);
  CHECK(g->r(0) == 0.0);
  CHECK(g->r_max() >= 200.0);
  for (std::size_t i = 1; i < g->size(); ++i) CHECK(g->r(i) > g->r(i - 1));
  for (std::size_t i = 2; i < g->size(); ++i) {
    const double ratio = (g->r(i) - g->r(i - 1)) / (g->r(i - 1) - g->r(i - 2));
    CHECK(ratio >= 1.0 - 1e-9);
    CHECK(ratio <= 1.1);
  }
  CHECK_THROWS_AS(RadialGrid::from_nodes(3, {0.0, 1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(RadialGrid::from_nodes(1, {0.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(RadialFunction::from_nodal(g, {1.0, 2.0}), InvalidArgument);
}

TEST_CASE("distribution function examples") {
  const double c3 = 4.0 * std::numbers::pi / 3.0;
  CHECK(distribution_function(ball(3, 1.0, 2.0), 1.0) == doctest::Approx(c3).epsilon(1e-14).scale(0));
  CHECK(distribution_function(ball(3, 1.0, 2.0), 2.5) == 0.0);
  auto cone = RadialFunction::from_nodal(uniform(2, 1.0, 1), {1.0, 0.0});
  CHECK(distribution_function(cone, 0.5) == doctest::Approx(std::numbers::pi * 0.25).epsilon(1e-14).scale(0));
}

TEST_CASE("distribution function is non-increasing and agrees with the layer cake") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = random_profile(rng, 2 + trial % 3, true, false);
    LayerCake cake(f);
    double prev = INFINITY;
    for (int k = 1; k <= 60; ++k) {
      const double lambda = 0.04 * k;
      const double mu = distribution_function(f, lambda);
      CHECK(mu <= prev);
      prev = mu;
      CHECK(cake.measure(lambda) == doctest::Approx(mu).epsilon(1e-12).scale(cake.support_measure()));
    }
  }
}

TEST_CASE("rearrangement examples") {
  const double c3 = 4.0 * std::numbers::pi / 3.0;
  auto prof = decreasing_rearrangement(ball(3, 1.0, 2.0));
  CHECK(prof(0.5 * c3) == 2.0);
  CHECK(prof(1.01 * c3) == 0.0);
  CHECK(prof.is_nonincreasing());

  // f(r) = r on [0, 1] in N = 2: μ(λ) = π(1 - λ²), so f*(3π/4) = 1/2.
  auto ramp = RadialFunction::from_cells(uniform(2, 1.0, 1), {0.0}, {1.0});
  CHECK(LayerCake(ramp).rearranged(0.75 * std::numbers::pi) == doctest::Approx(0.5).epsilon(1e-12).scale(0));
  CHECK(decreasing_rearrangement(ramp)(0.75 * std::numbers::pi) == doctest::Approx(0.5).epsilon(1e-8).scale(0));

  // Annulus 1 ≤ |x| ≤ 2 in N = 3 rearranges to the ball of radius 7^{1/3}.
  auto grid = RadialGrid::from_nodes(3, {0.0, 1.0, 2.0});
  auto annulus = RadialFunction::indicator(grid, 1.0, 2.0);
  auto sharp = spherical_rearrangement(annulus);
  const double R = std::cbrt(7.0);
  CHECK(sharp(0.0) == 1.0);
  CHECK(sharp(R * (1 - 1e-9)) == 1.0);
  CHECK(sharp(R * (1 + 1e-9)) == 0.0);
  CHECK(sharp.grid().r_max() == doctest::Approx(R).epsilon(1e-14).scale(0));
}

TEST_CASE("rearrangement of a decreasing profile is itself") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto f = random_profile(rng, 3, false, true);
    auto sharp = spherical_rearrangement(f);
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
      const double r = f.grid().r(i);
      CHECK(sharp(r) == doctest::Approx(f(r)).epsilon(1e-9).scale(f.max_abs()));
    }
  }
}

TEST_CASE("spherical rearrangement is equimeasurable") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    auto f = random_profile(rng, 2 + trial % 3, true, false);
    auto sharp = spherical_rearrangement(f);
    CHECK(sharp.is_nonincreasing_nonnegative());
    const double support = distribution_function(f, 1e-300);
    for (int k = 1; k < 50; ++k) {
      const double lambda = f.max_abs() * k / 50.0;
      const double a = distribution_function(f, lambda);
      const double b = distribution_function(sharp, lambda);
      CHECK(std::fabs(a - b) <= 1e-8 * support);
    }
  }
}

TEST_CASE("ball indicator norms against the closed form") {
  for (int n : {2, 3, 4, 5})
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.5})
      for (double s : {1.0, 1.5, 2.0, 3.0, 7.0})
        for (double R : {0.3, 1.0, 4.0, 16.0}) {
          if (p == 1.0 && s != 1.0) continue;
          const double c = unit_ball_volume(n);
          const double expected = std::pow(c * p / s, 1.0 / s) * std::pow(R, n / p);
          auto f = ball(n, R);
          const auto e = LE(E(p), E(s));
          CHECK(lorentz_norm(f, e) == doctest::Approx(expected).epsilon(1e-10).scale(0));
          CHECK(lorentz_norm_layer_cake(f, e) == doctest::Approx(expected).epsilon(1e-10).scale(0));
          if (p > 1.0) CHECK(lorentz_norm(f, LE(E(p), kInf)) == doctest::Approx(std::pow(R, n / p)).epsilon(1e-12).scale(0));
        }
}

TEST_CASE("L^{p,p} equals L^p") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto f = random_profile(rng, 2 + trial % 3, trial % 2 == 0, trial % 3 == 0);
    for (double p : {1.0, 2.0, 3.0}) {
      const double lp = lp_norm(f, E(p));
      CHECK(lp == doctest::Approx(lp_oracle(f, p)).epsilon(1e-9).scale(0));
      CHECK(lorentz_norm(f, LE(E(p), E(p))) == doctest::Approx(lp).epsilon(1e-8).scale(0));
    }
    CHECK(lorentz_norm(f, LE(kInf, kInf)) == f.max_abs());
  }
}

TEST_CASE("radial and layer-cake routes agree on decreasing profiles") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = random_profile(rng, 2 + trial % 3, false, true);
    for (auto [p, s] : {std::pair{1.5, 1.0}, {1.5, 3.0}, {3.0, 1.0}, {3.0, 2.0}, {4.0, 4.0}, {2.5, 1.7}}) {
      const auto e = LE(E(p), E(s));
      CHECK(lorentz_norm_radial(f, e) == doctest::Approx(lorentz_norm_layer_cake(f, e)).epsilon(1e-9).scale(0));
    }
    const auto e = LE(E(3.0), kInf);
    CHECK(lorentz_norm_radial(f, e) == doctest::Approx(lorentz_norm_layer_cake(f, e)).epsilon(1e-9).scale(0));
  }
}

TEST_CASE("norm of a rearrangement equals the norm of the function") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 8; ++trial) {
    auto f = random_profile(rng, 3, true, false);
    auto sharp = spherical_rearrangement(f);
    for (auto [p, s] : {std::pair{1.5, 1.0}, {3.0, 2.0}, {2.0, 2.0}}) {
      const auto e = LE(E(p), E(s));
      CHECK(lorentz_norm_radial(sharp, e) == doctest::Approx(lorentz_norm_layer_cake(f, e)).epsilon(1e-7).scale(0));
    }
  }
}

TEST_CASE("scaling and quasi-triangle properties") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 15; ++trial) {
    auto f = random_profile(rng, 3, true, false);
    auto g = random_profile(rng, 3, true, false);
    for (auto [p, s] : {std::pair{1.5, 1.0}, {3.0, 2.0}, {4.0, 8.0}}) {
      const auto e = LE(E(p), E(s));
      const double lam = 0.5 + 3.0 * trial / 15.0;
      CHECK(lorentz_norm(f.dilated(lam), e) ==
            doctest::Approx(std::pow(lam, 3.0 / p) * lorentz_norm(f, e)).epsilon(1e-6).scale(0));
      CHECK(lorentz_norm(f + g, e) <= 2.0 * (lorentz_norm(f, e) + lorentz_norm(g, e)));
    }
  }
}

TEST_CASE("embedding ratio stays bounded across a growing family") {
  auto max_ratio = [](int count) {
    std::mt19937 rng(31);
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
      auto f = random_profile(rng, 3, true, i % 2 == 0);
      const double lo = lorentz_norm(f, LE(E(3.0), E(1.0)));
      const double hi = lorentz_norm(f, LE(E(3.0), E(4.0)));
      worst = std::max(worst, hi / lo);
    }
    return worst;
  };
  const double a = max_ratio(40), b = max_ratio(80);
  CHECK(std::isfinite(a));
  CHECK(b <= a * 1.25);
}

TEST_CASE("truncated norms") {
  auto g = uniform(3, 4.0, 8);
  auto f = RadialFunction::indicator(g, 0.0, 4.0);
  const auto e = LE(E(2.0), E(1.0));
  const double c = unit_ball_volume(3);
  auto closed = [&](double R) { return 2.0 * c * std::pow(R, 1.5); };
  auto all = truncated_norms(f, e, 5.0, 0.0);
  CHECK(all.inner == doctest::Approx(lorentz_norm(f, e)));
  CHECK(all.outer == 0.0);
  // cutoff radius 1.5·√(1+3) = 3 < 4.
  auto part = truncated_norms(f, e, 1.5, 3.0);
  CHECK(part.inner == doctest::Approx(closed(3.0)).epsilon(1e-10).scale(0));
  CHECK(part.outer == doctest::Approx(closed(std::cbrt(64.0 - 27.0))).epsilon(1e-10).scale(0));
  double prev = INFINITY;
  for (double d : {2.0, 1.0, 0.5, 0.25, 0.1}) {
    const double inner = truncated_norms(f, e, d, 0.0).inner;
    CHECK(inner <= prev);
    prev = inner;
  }
}
