#include <chrono>
#include <cmath>
#include <numbers>

#include "decaylab/errors.hpp"
#include "decaylab/heat.hpp"
#include "decaylab/lorentz.hpp"
#include "doctest.h"

using namespace decaylab;

namespace {

const Exponent kInf = Exponent::infinity();
LorentzExponents LE(double p, double s) { return LorentzExponents::make(Exponent::finite(p), Exponent::finite(s)); }
const LorentzExponents kSup = LorentzExponents::make(kInf, kInf);

GridPtr solver_grid(int n, double t_end, GridSpacing s = {}) { return RadialGrid::make(n, s, auto_r_max(t_end)); }

RadialFunction bump(int n, double R = 1.0) {
  std::vector<double> nodes(201);
  for (int i = 0; i <= 200; ++i) nodes[i] = R * i / 200.0;
  return RadialFunction::sample(RadialGrid::from_nodes(n, nodes), [R](double r) {
    const double w = 1 - r * r / (R * R);
    return w > 0 ? w * w : 0.0;
  });
}

TimeGrid times(double t_end, double h0 = 1e-4, double ratio = TimeGridSpec{}.ratio) {
  TimeGridSpec s;
  s.t_end = t_end;
  s.h0 = h0;
  s.ratio = ratio;
  return TimeGrid::make(0.0, s);
}

// P(|X| < 1) for X ~ N(0, 2t I_3): the free heat solution of χ_{B(0,1)} at the origin, times (4πt)^{3/2} / |B|.
double ball_center_oracle(double t) {
  const double s = std::sqrt(2.0 * t);
  return std::erf(1.0 / (s * std::sqrt(2.0))) - std::sqrt(2.0 / std::numbers::pi) / s * std::exp(-1.0 / (2 * s * s));
}

}  // namespace

TEST_CASE("time grid lands on dyadic snapshots") {
  auto tg = times(1000.0);
  const auto& t = tg.times();
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1000.0);
  int snaps = 0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    CHECK(t[k] > t[k - 1]);
    if (tg.is_snapshot(k)) {
      ++snaps;
      const double l = std::log2(t[k]);
      CHECK((l == std::round(l) || t[k] == 1000.0));
    }
  }
  CHECK(snaps == 7 + 10 + 1);  // 2^-7 .. 2^9 and t_end
}

TEST_CASE("free heat flow of a Gaussian") {
  const int n = 3;
  const double t0 = 1.0, t_end = 200.0;
  auto grid = solver_grid(n, t_end);
  auto phi = RadialFunction::sample(grid, [&](double r) { return std::exp(-r * r / (4 * t0)); });
  auto tr = evolve(PotentialSpec::zero(n), phi, grid, times(t_end), {{kSup}});
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double t = tr.times[k];
    CHECK(tr.values[0][k] == doctest::Approx(std::pow(t0 / (t0 + t), 1.5)).epsilon(1e-4).scale(0));
  }
  // The whole profile, not just its maximum.
  const auto& u = tr.snapshot_at(128.0);
  for (double r : {0.0, 5.0, 20.0, 40.0})
    CHECK(u(r) == doctest::Approx(std::pow(t0 / (t0 + 128.0), 1.5) * std::exp(-r * r / (4 * (t0 + 128.0))))
                      .epsilon(2e-4).scale(0)
                      .scale(1e-3));
  CHECK(discrete_pairing_drift(tr).max_drift <= 1e-12);
  CHECK(tr.leakage <= 1e-12);
}

TEST_CASE("free heat flow of a ball indicator") {
  const int n = 3;
  const double t_end = 1000.0;
  auto grid = solver_grid(n, t_end);
  auto phi = RadialFunction::indicator(grid, 0.0, 1.0);
  auto tr = evolve(PotentialSpec::zero(n), phi, grid, times(t_end), {{kSup}});
  const double vol = unit_ball_volume(3);
  for (double t : {1.0, 8.0, 64.0, 1000.0}) {
    const double u0 = tr.snapshot_at(t)(0.0);
    CHECK(u0 == doctest::Approx(ball_center_oracle(t)).epsilon(2e-3).scale(0));
  }
  const double scaled = tr.snapshot_at(1000.0)(0.0) * std::pow(4 * std::numbers::pi * 1000.0, 1.5);
  CHECK(scaled == doctest::Approx(vol).epsilon(0.01).scale(0));
  CHECK(discrete_pairing_drift(tr).max_drift <= 1e-6);
  for (double m : tr.min_value) CHECK(m >= -1e-12);
}

TEST_CASE("self-convergence under refinement") {
  const int n = 3;
  const double t_end = 100.0;
  auto phi = bump(n);
  auto l2_final = [&](GridSpacing s, double h0, double ratio) {
    auto grid = solver_grid(n, t_end, s);
    auto tr = evolve(PotentialSpec::zero(n), phi, grid, times(t_end, h0, ratio), {{LE(2, 2)}});
    return tr.values[0].back();
  };
  const double ratio = TimeGridSpec{}.ratio;
  const double coarse = l2_final({0.02, 10.0, 1.02}, 1e-4, ratio);
  const double fine = l2_final({0.01, 10.0, 1.01}, 5e-5, std::sqrt(ratio));
  CHECK(std::fabs(coarse - fine) / fine <= 1e-4);
}

TEST_CASE("ground-state evolution invariants") {
  const int n = 3;
  const double t_end = 1e4;
  auto V = ground_state_potential(n, 1.0);
  auto grid = solver_grid(n, t_end);
  auto phi = bump(n);
  auto tr = evolve(V, phi, grid, times(t_end), {{LE(2, 2)}, {LE(1, 1)}});
  auto U = solve_harmonic(V, grid);
  CHECK(conserved_pairing(tr, U).max_drift <= 1e-3);
  CHECK(discrete_pairing_drift(tr).max_drift <= 1e-9);
  const double l2_0 = tr.l2_scheme.front();
  for (double v : tr.l2_scheme) CHECK(v <= l2_0 * (1 + 1e-10));
  for (std::size_t k = 1; k < tr.l2_scheme.size(); ++k) CHECK(tr.l2_scheme[k] <= tr.l2_scheme[k - 1] * (1 + 1e-12));
  for (double m : tr.min_value) CHECK(m >= -1e-12);

  // Interior lower bound: the normalized minimum settles into a band.
  auto ratios = interior_lower_ratio(tr, U, 0.1);
  REQUIRE(ratios.size() > 5);
  double lo = INFINITY, hi = 0;
  for (auto r : ratios) {
    CHECK(r.min_ratio > 0.0);
    lo = std::min(lo, r.min_ratio);
    hi = std::max(hi, r.min_ratio);
  }
  CHECK(hi / lo <= 3.0);
  auto halved = interior_lower_ratio(tr, U, 0.05);
  for (std::size_t k = 0; k < ratios.size(); ++k) CHECK(halved[k].min_ratio >= ratios[k].min_ratio * (1 - 1e-12));
}

TEST_CASE("free interior ratio approaches the heat-kernel constant") {
  const int n = 3;
  const double t_end = 1e4;
  auto grid = solver_grid(n, t_end);
  auto phi = bump(n);
  auto tr = evolve(PotentialSpec::zero(n), phi, grid, times(t_end), {});
  HarmonicProfile one{RadialFunction::sample(grid, [](double) { return 1.0; }), 0.0, Criticality::Subcritical, 0.0};
  const double mass = lp_norm(phi, Exponent::finite(1.0));
  auto ratios = interior_lower_ratio(tr, one, 0.1);
  const double limit = std::pow(4 * std::numbers::pi, -1.5) * mass;
  CHECK(ratios.back().min_ratio == doctest::Approx(limit).epsilon(0.01).scale(0));
  for (auto r : ratios) CHECK(r.min_ratio > 0.5 * limit);
}

TEST_CASE("truncation drift shrinks with the domain") {
  const int n = 3;
  const double t_end = 400.0;
  SchemeOptions loose;
  loose.enforce_domain_rule = false;
  loose.leakage_budget = INFINITY;
  auto drift = [&](double r_max) {
    auto grid = RadialGrid::make(n, GridSpacing{}, r_max);
    auto tr = evolve(PotentialSpec::zero(n), bump(n), grid, times(t_end), {}, loose);
    return discrete_pairing_drift(tr).max_drift;
  };
  const double d1 = drift(40.0), d2 = drift(80.0);
  CHECK(d1 > 0.0);
  CHECK(d2 < d1);

  auto grid = RadialGrid::make(n, GridSpacing{}, 40.0);
  SchemeOptions strict;
  strict.enforce_domain_rule = false;
  CHECK_THROWS_AS(evolve(PotentialSpec::zero(n), bump(n), grid, times(t_end), {}, strict), NumericalFailure);
  CHECK_THROWS_AS(evolve(PotentialSpec::zero(n), bump(n), grid, times(t_end), {}), InvalidArgument);
}

TEST_CASE("semigroup property by restart") {
  const int n = 3;
  const double s = 64.0, t_end = 256.0;
  auto V = ground_state_potential(n, 1.0);
  auto grid = solver_grid(n, t_end);
  const TimeGrid tg = times(t_end);
  auto full = evolve(V, bump(n), grid, tg, {{LE(2, 2)}});
  REQUIRE(full.has_snapshot(s));
  SchemeOptions nodal;
  nodal.project_datum = false;
  auto restart = evolve(V, full.snapshot_at(s), grid, tg.resumed_at(s), {{LE(2, 2)}}, nodal);
  const double a = full.values[0].back(), b = restart.values[0].back();
  CHECK(std::fabs(a - b) / a <= 1e-6);
  CHECK(restart.times.front() == s);
  CHECK(restart.times.back() == full.times.back());
}

TEST_CASE("short-time smoothing bound") {
  const int n = 3;
  auto grid = solver_grid(n, 1.0);
  auto phi = RadialFunction::indicator(grid, 0.0, 1.0);
  const double l1 = lp_norm(phi, Exponent::finite(1.0));
  auto bound = [&](double ratio) {
    auto tr = evolve(ground_state_potential(n, 1.0), phi, grid, times(1.0, 1e-4, ratio), {{kSup}});
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      if (tr.times[k] >= 0.01) worst = std::max(worst, tr.values[0][k] * std::pow(tr.times[k], 1.5) / l1);
    return worst;
  };
  const double a = bound(1.05), b = bound(1.025);
  CHECK(std::isfinite(a));
  CHECK(b == doctest::Approx(a).epsilon(0.02).scale(0));
}
