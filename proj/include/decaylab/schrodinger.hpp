#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decaylab/radial.hpp"

namespace decaylab {

enum class Criticality { Subcritical, Critical };
std::string to_string(Criticality c);

enum class PotentialKind { Zero, GroundState, InverseSquareTail };
std::string to_string(PotentialKind k);
PotentialKind parse_potential_kind(const std::string& text);

/// Half-width of the excluded band around A = (N-2)/2.
inline constexpr double kHardyGuard = 1e-3;

/// A radial potential V(|x|) with r^2 V(r) -> ω.
///   Zero:              V ≡ 0.
///   GroundState:       V = [A(A+2-N) r^2 - A N] / (1+r^2)^2, the potential ΔU/U of U = (1+r^2)^{-A/2}.
///   InverseSquareTail: V = ω / (ℓ^2 + r^2).
class PotentialSpec {
 public:
  static PotentialSpec zero(int dimension);
  static PotentialSpec ground_state(int dimension, double A);
  static PotentialSpec inverse_square_tail(int dimension, double omega, double cutoff);

  PotentialKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  /// Prescribed exponent for GroundState (0 for Zero).
  double prescribed_A() const { return A_; }
  double omega() const { return omega_; }
  double cutoff() const { return cutoff_; }
  /// ω < 0 tails are not guaranteed to give a nonnegative operator.
  bool experimental() const { return kind_ == PotentialKind::InverseSquareTail && omega_ < 0.0; }

  double operator()(double r) const;
  double derivative(double r) const;
  /// Closed-form positive harmonic profile, when the kind has one.
  std::optional<double> exact_profile(double r) const;
  std::string describe() const;

 private:
  friend PotentialSpec ground_state_potential(int dimension, double A);
  PotentialSpec(PotentialKind kind, int dimension, double A, double omega, double cutoff);

  PotentialKind kind_;
  int dimension_;
  double A_;
  double omega_;
  double cutoff_;
};

/// A = (N-2 ∓ √((N-2)^2 + 4ω)) / 2, minus for the subcritical branch.
double branch_exponent(int dimension, double omega, Criticality branch);

/// (α, β) = (N/(N-A), N/A) for 0 < A < N/2.
std::pair<double, double> alpha_beta(int dimension, double A);

PotentialSpec ground_state_potential(int dimension, double A);

struct HarmonicProfile {
  RadialFunction U;
  double A = 0.0;
  Criticality criticality = Criticality::Subcritical;
  /// RMS residual of the tail fit that identified A.
  double fit_residual = 0.0;
};

struct TailFit {
  double A;
  double residual;  // RMS of -log U - (c + A log r) over the window
  double window_lo;
  double window_hi;
};

/// Least-squares slope of -log U against log r over the nodes in [R_max/10, R_max].
/// Throws NumericalFailure when the residual exceeds max_residual.
TailFit estimate_A(const RadialFunction& U, double max_residual = 1e-2);

/// Integrates U'' + (N-1)/r U' = V U outward from U(0) = 1, U'(0) = 0 with an
/// adaptive Dormand–Prince scheme and a Taylor start. A is fitted on the last
/// decade, snapped to the nearer branch exponent of ω when within 0.05, and U
/// is normalized so that r^A U(r) = 1 at R_max.
HarmonicProfile solve_harmonic(const PotentialSpec& V, const GridPtr& grid);

/// min over probes of ∫(|∇φ|^2 + V φ^2) dx / ∫ φ^2 dx.
double rayleigh_check(const std::function<double(double)>& V, const std::vector<RadialFunction>& probes);
double rayleigh_check(const PotentialSpec& V, const std::vector<RadialFunction>& probes);

/// Numerical look at the tail conditions on a logarithmic grid over [1, r_hi].
struct PotentialDiagnostics {
  double omega_estimate;     // r^2 V(r) at r_hi
  double correction_order;   // slope a in |r^2 V - ω| ~ r^{-a}
  double sup_r3_dV;          // sup_{r>1} r^3 |V'(r)|
  bool finite_at_origin;
};
PotentialDiagnostics diagnose_potential(const PotentialSpec& V, double r_hi = 1e6);

/// Compactly supported probe bumps (1 - r^2/R^2)_+^2 for the given radii.
std::vector<RadialFunction> bump_probes(int dimension, const std::vector<double>& radii, int cells = 400);

}  // namespace decaylab
