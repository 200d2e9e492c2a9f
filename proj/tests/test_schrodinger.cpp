#include <cmath>
#include <random>

#include "decaylab/errors.hpp"
#include "decaylab/exponent.hpp"
#include "decaylab/schrodinger.hpp"
#include "doctest.h"

using namespace decaylab;

namespace {

GridPtr tail_grid(int n, double r_max = 2000.0) {
  return RadialGrid::make(n, GridSpacing{0.02, 10.0, 1.02}, r_max);
}

// Radial Laplacian by central differences, as an independent check of V = ΔU/U.
double laplacian_over_u(const std::function<double(double)>& U, int n, double r) {
  const double h = 1e-4 * std::max(1.0, r);
  const double up = U(r + h), u0 = U(r), um = U(r - h);
  const double d2 = (up - 2 * u0 + um) / (h * h);
  const double d1 = (up - um) / (2 * h);
  return (d2 + (n - 1) / r * d1) / u0;
}

}  // namespace

TEST_CASE("branch exponent examples") {
  CHECK(branch_exponent(3, 0.0, Criticality::Subcritical) == 0.0);
  CHECK(branch_exponent(3, 0.0, Criticality::Critical) == doctest::Approx(1.0).epsilon(1e-15).scale(0));
  CHECK(branch_exponent(4, 3.0, Criticality::Subcritical) == doctest::Approx(-1.0).epsilon(1e-15).scale(0));
  CHECK(branch_exponent(4, 3.0, Criticality::Critical) == doctest::Approx(3.0).epsilon(1e-15).scale(0));
  CHECK_THROWS_AS(branch_exponent(3, -0.25, Criticality::Subcritical), InvalidArgument);
  CHECK_THROWS_AS(branch_exponent(4, -1.5, Criticality::Critical), InvalidArgument);
}

TEST_CASE("branch exponent sign facts on a randomized ω grid") {
  std::mt19937 rng(2);
  for (int n : {3, 4, 5}) {
    const double lo = -0.25 * (n - 2.0) * (n - 2.0);
    std::uniform_real_distribution<double> u(lo + 1e-6, 20.0);
    for (int k = 0; k < 200; ++k) {
      const double w = u(rng);
      const double sub = branch_exponent(n, w, Criticality::Subcritical);
      CHECK(w * sub <= 1e-14);
      CHECK(sub < 0.5 * n);
      CHECK(branch_exponent(n, w, Criticality::Critical) > 0.0);
    }
  }
}

TEST_CASE("alpha and beta") {
  auto [a3, b3] = alpha_beta(3, 1.0);
  CHECK(a3 == doctest::Approx(1.5));
  CHECK(b3 == doctest::Approx(3.0));
  auto [a4, b4] = alpha_beta(4, 1.0);
  CHECK(a4 == doctest::Approx(4.0 / 3.0));
  CHECK(b4 == doctest::Approx(4.0));
  for (double A : {0.1, 0.5, 1.0, 1.4}) {
    auto [a, b] = alpha_beta(3, A);
    CHECK(1.0 < a);
    CHECK(a < 2.0);
    CHECK(2.0 < b);
    CHECK(holder_conjugate(Exponent::finite(a)).value() == doctest::Approx(b).epsilon(1e-9).scale(0));
  }
  CHECK_THROWS_AS(alpha_beta(3, 1.5), InvalidArgument);
  CHECK_THROWS_AS(alpha_beta(3, 0.0), InvalidArgument);
}

TEST_CASE("ground-state potential") {
  auto V = ground_state_potential(3, 1.0);
  CHECK(V.omega() == 0.0);
  CHECK(V(0.0) == doctest::Approx(-3.0));
  for (double r : {0.0, 0.5, 1.0, 3.0, 10.0}) CHECK(V(r) == doctest::Approx(-3.0 / std::pow(1 + r * r, 2)));
  for (int n : {3, 4, 5})
    for (double A : {0.25, 0.75, 1.25, 1.5, 2.2}) {
      if (A >= 0.5 * n || std::fabs(A - 0.5 * (n - 2)) <= kHardyGuard) continue;
      auto W = ground_state_potential(n, A);
      auto U = [&](double r) { return *W.exact_profile(r); };
      for (double r : {0.3, 1.0, 2.5, 7.0}) CHECK(W(r) == doctest::Approx(laplacian_over_u(U, n, r)).epsilon(1e-5).scale(0));
      CHECK(1e8 * W(1e4) == doctest::Approx(A * (A - n + 2)).epsilon(1e-6).scale(0));
      const auto branch = A > 0.5 * (n - 2) ? Criticality::Critical : Criticality::Subcritical;
      CHECK(branch_exponent(n, W.omega(), branch) == doctest::Approx(A).epsilon(1e-12).scale(0));
      // Derivative against a central difference.
      for (double r : {0.5, 2.0, 30.0}) {
        const double h = 1e-5 * r;
        CHECK(W.derivative(r) == doctest::Approx((W(r + h) - W(r - h)) / (2 * h)).epsilon(1e-6).scale(0));
      }
    }
  CHECK(ground_state_potential(3, 0.0).kind() == PotentialKind::Zero);
  CHECK_THROWS_AS(ground_state_potential(3, 0.5), InvalidArgument);
  CHECK_THROWS_AS(ground_state_potential(3, 0.5005), InvalidArgument);
  CHECK_THROWS_AS(ground_state_potential(3, 1.5), InvalidArgument);
}

TEST_CASE("tail conditions hold numerically") {
  for (auto V : {ground_state_potential(3, 1.0), ground_state_potential(4, 1.5),
                 PotentialSpec::inverse_square_tail(3, 0.5, 2.0)}) {
    auto d = diagnose_potential(V);
    CHECK(d.finite_at_origin);
    CHECK(d.omega_estimate == doctest::Approx(V.omega()).epsilon(1e-6).scale(1.0));
    CHECK(d.correction_order == doctest::Approx(2.0).epsilon(0.02).scale(0));
    CHECK(std::isfinite(d.sup_r3_dV));
  }
}

TEST_CASE("solve_harmonic examples") {
  auto zero = solve_harmonic(PotentialSpec::zero(3), tail_grid(3));
  for (double u : zero.U.nodal_values()) CHECK(u == doctest::Approx(1.0).epsilon(1e-14).scale(0));
  CHECK(zero.A == 0.0);

  auto grid = tail_grid(3);
  auto V = ground_state_potential(3, 1.0);
  auto prof = solve_harmonic(V, grid);
  CHECK(prof.A == doctest::Approx(1.0));
  CHECK(prof.criticality == Criticality::Critical);
  const auto U = prof.U.nodal_values();
  for (std::size_t i = 0; i < grid->size(); ++i)
    CHECK(U[i] == doctest::Approx(1.0 / std::sqrt(1.0 + grid->r(i) * grid->r(i))).epsilon(1e-6).scale(0));
  // U'/U -> -A/r in the tail.
  for (std::size_t i = 1; i + 1 < grid->size(); ++i) {
    const double r = grid->r(i);
    if (r < 100.0) continue;
    const double dlog = (std::log(U[i + 1]) - std::log(U[i - 1])) / (grid->r(i + 1) - grid->r(i - 1));
    CHECK(dlog * r == doctest::Approx(-1.0).epsilon(0.01).scale(0));
  }
}

TEST_CASE("harmonic round trip and two-sided bound") {
  for (auto [n, A] : {std::pair{3, 0.25}, {3, 0.75}, {3, 1.0}, {3, 1.25}, {4, 0.5}, {4, 1.5}}) {
    auto prof = solve_harmonic(ground_state_potential(n, A), tail_grid(n));
    auto fit = estimate_A(prof.U);
    CHECK(fit.A == doctest::Approx(A).epsilon(0.01 / A).scale(0));
    CHECK(prof.A == doctest::Approx(A).epsilon(1e-12).scale(0));
    double lo = INFINITY, hi = 0.0;
    const auto U = prof.U.nodal_values();
    for (std::size_t i = 0; i < U.size(); ++i) {
      CHECK(U[i] > 0.0);
      const double ratio = U[i] * std::pow(1.0 + prof.U.grid().r(i), A);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    CHECK(hi / lo <= 10.0);
  }
}

TEST_CASE("estimate_A on synthetic profiles") {
  auto grid = tail_grid(3, 5000.0);
  auto U1 = RadialFunction::sample(grid, [](double r) { return 1.0 / std::sqrt(1 + r * r); });
  CHECK(estimate_A(U1).A == doctest::Approx(1.0).epsilon(0.01).scale(0));
  auto U0 = RadialFunction::sample(grid, [](double) { return 1.0; });
  CHECK(estimate_A(U0).A == 0.0);
  auto Ug = RadialFunction::sample(grid, [](double r) { return std::pow(1 + r, 0.5); });
  CHECK(estimate_A(Ug).A == doctest::Approx(-0.5).epsilon(0.02).scale(0));
  auto wavy = RadialFunction::sample(grid, [](double r) { return 2.0 + std::sin(r / 50.0); });
  CHECK_THROWS_AS(estimate_A(wavy, 1e-3), NumericalFailure);
}

TEST_CASE("Rayleigh quotient") {
  auto probes = bump_probes(3, {0.5, 1.0, 4.0, 20.0});
  CHECK(rayleigh_check(PotentialSpec::zero(3), probes) >= 0.0);
  CHECK(rayleigh_check(ground_state_potential(3, 1.0), probes) >= -1e-8);
  CHECK(rayleigh_check(ground_state_potential(4, 1.5), bump_probes(4, {0.5, 2.0, 30.0})) >= -1e-8);
  auto bad = [](double r) { return -10.0 / (1.0 + r * r); };
  CHECK(rayleigh_check(bad, bump_probes(3, {30.0})) < 0.0);
}

TEST_CASE("Rayleigh quotient of a ground-state potential against direct quadrature") {
  // Ground-state identity: Q(φ) = ∫ |∇(φ/U)|^2 U^2 dx for smooth φ.
  auto V = ground_state_potential(3, 1.0);
  auto probe = bump_probes(3, {3.0}, 4000)[0];
  const double q = rayleigh_check(V, {probe});
  const double R = 3.0;
  auto phi = [&](double r) { const double w = 1 - r * r / (R * R); return w * w; };
  auto dphi = [&](double r) { return -4.0 * r / (R * R) * (1 - r * r / (R * R)); };
  auto U = [](double r) { return 1.0 / std::sqrt(1 + r * r); };
  auto dU = [](double r) { return -r / std::pow(1 + r * r, 1.5); };
  const int m = 20000;
  double num = 0, den = 0;
  for (int k = 0; k < m; ++k) {
    const double r = (k + 0.5) * R / m;
    const double g = (dphi(r) * U(r) - phi(r) * dU(r)) / (U(r) * U(r));
    num += g * g * U(r) * U(r) * r * r;
    den += phi(r) * phi(r) * r * r;
  }
  CHECK(q == doctest::Approx(num / den).epsilon(1e-5).scale(0));
}
