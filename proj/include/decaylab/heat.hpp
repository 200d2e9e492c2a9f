#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "decaylab/exponent.hpp"
#include "decaylab/radial.hpp"
#include "decaylab/schrodinger.hpp"

namespace decaylab {

/// Smallest admissible R_max for a run to t_end: 12·√(1 + t_end).
double auto_r_max(double t_end);

struct TimeGridSpec {
  double t_end = 1e4;
  double h0 = 1e-4;
  double ratio = 1.01;
  double cap = std::numeric_limits<double>::infinity();
  int startup_steps = 2;
  /// Snapshots at 2^k for k >= this exponent (plus the first and last time).
  int min_dyadic_exponent = -7;
};

/// Geometric step sequence that lands exactly on every dyadic snapshot time.
class TimeGrid {
 public:
  static TimeGrid make(double t_start, const TimeGridSpec& spec);

  const std::vector<double>& times() const { return times_; }
  std::size_t steps() const { return times_.size() - 1; }
  double t_start() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  bool is_snapshot(std::size_t k) const { return snapshot_[k]; }
  int startup_steps() const { return startup_steps_; }
  const TimeGridSpec& spec() const { return spec_; }
  /// The remaining steps from grid time t onward, continuing the same schedule.
  TimeGrid resumed_at(double t) const;

 private:
  std::vector<double> times_;
  std::vector<bool> snapshot_;
  int startup_steps_ = 2;
  TimeGridSpec spec_;
};

enum class Region { Whole, Inner, Outer };
std::string to_string(Region r);

/// A Lorentz norm recorded at every step, optionally restricted to
/// |x| <= δ(1+t)^{1/2} (Inner) or |x| > δ(1+t)^{1/2} (Outer).
struct Observable {
  LorentzExponents exps;
  Region region = Region::Whole;
  double cutoff = 0.5;
  std::string tag() const;
  friend bool operator==(const Observable& a, const Observable& b) {
    return a.exps == b.exps && a.region == b.region && (a.region == Region::Whole || a.cutoff == b.cutoff);
  }
};

/// Radial finite-volume operator K = L + W·diag(V) with W du/dt = -K u:
/// nodes r_0 = 0, ..., r_M, u_M = 0, dual faces at midpoints.
struct DiscreteOperator {
  int dimension = 0;
  std::vector<double> weight;       // w_i, i < M
  std::vector<double> conductance;  // κ_{i+1/2}, i < M
  std::vector<double> potential;    // V_i, i < M
  std::vector<double> harmonic;     // discrete harmonic profile U_h, i <= M, U_h(0) = 1
};

/// For GroundState kinds V_i is taken as -(L U)_i / (w_i U_i) with the exact
/// profile U, so U is exactly discrete-harmonic and the discrete operator is
/// nonnegative. Other kinds use pointwise V and a recurrence for U_h.
DiscreteOperator build_operator(const PotentialSpec& V, const GridPtr& grid);

/// Cell averages over the dual cells: u_i = (1/w_i) ∫ φ dx; exact for
/// piecewise-linear φ on any grid, and mass-preserving.
std::vector<double> project_to_nodes(const RadialFunction& phi, const DiscreteOperator& op, const RadialGrid& grid);

struct SchemeOptions {
  /// Allowed boundary loss of the discrete pairing, relative to its initial value.
  double leakage_budget = 1e-6;
  /// Relative to sup|φ|.
  double positivity_tolerance = 1e-12;
  /// Enforce R_max >= 12·√(1+t_end).
  bool enforce_domain_rule = true;
  /// false: take φ's nodal values as the state (φ must live on the solver grid).
  bool project_datum = true;
};

struct EvolutionTrace {
  std::string potential;
  int dimension = 0;
  GridPtr grid;
  TimeGridSpec time_spec;
  SchemeOptions options;
  std::vector<Observable> observables;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [observable][step]
  std::vector<double> pairing;              // Σ w_i U_h,i u_i
  std::vector<double> l2_scheme;            // (Σ w_i u_i^2)^{1/2}
  std::vector<double> sup_norm;
  std::vector<double> min_value;
  std::vector<double> snapshot_times;
  std::vector<RadialFunction> snapshots;
  std::vector<double> lumped_weights;
  std::vector<double> discrete_harmonic;
  double leakage = 0.0;  // relative boundary loss of the pairing
  bool nonnegative_datum = false;

  std::size_t observable_index(const Observable& o) const;
  /// Log-log interpolation of a recorded observable between steps.
  double value_at(std::size_t observable, double t) const;
  const RadialFunction& snapshot_at(double t) const;
  bool has_snapshot(double t) const;
  /// CSV with a '# {json}' header line and rows t,norm_tag,value.
  void write_csv(const std::string& path) const;
  std::string header_json() const;
};

/// Crank–Nicolson integration of ∂_t u = Δu - V u after startup implicit-Euler steps.
EvolutionTrace evolve(const PotentialSpec& V, const RadialFunction& phi, const GridPtr& grid, const TimeGrid& tg,
                      const std::vector<Observable>& observables, const SchemeOptions& options = {});

struct DriftReport {
  double max_drift;
  double at_time;
};

/// max over snapshots of |∫u U dx - ∫φ U dx| / ∫φ U dx with lumped weights and the ODE profile.
DriftReport conserved_pairing(const EvolutionTrace& trace, const HarmonicProfile& U);

/// Same quantity from the per-step discrete pairing record.
DriftReport discrete_pairing_drift(const EvolutionTrace& trace);

struct LowerRatio {
  double t;
  double min_ratio;
};

/// min over |x| <= ε√(1+t) of u(x,t) t^{N/2-A} / U(|x|) at every snapshot time >= 2.
std::vector<LowerRatio> interior_lower_ratio(const EvolutionTrace& trace, const HarmonicProfile& U, double eps = 0.1);

}  // namespace decaylab
