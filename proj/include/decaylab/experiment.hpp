#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "decaylab/exponent.hpp"
#include "decaylab/heat.hpp"
#include "decaylab/radial.hpp"
#include "decaylab/rates.hpp"
#include "decaylab/schrodinger.hpp"

namespace decaylab {

struct PotentialConfig {
  PotentialKind kind = PotentialKind::GroundState;
  double A = 1.0;        // GroundState
  double omega = 0.0;    // InverseSquareTail
  double cutoff = 1.0;   // InverseSquareTail
};

struct GridConfig {
  GridSpacing spacing;
  std::optional<double> r_max;  // empty: 12·sqrt(1 + t_end) of the longest run
};

struct TimeConfig {
  double t_end = 1e4;
  /// Horizon for rate cells whose theory carries a log factor.
  double log_t_end = 1e6;
  double h0 = 1e-4;
  double ratio = 1.01;
  int startup_steps = 2;
};

/// Initial datum of evolve and invariants: bump (1 - r^2/R^2)_+^2, ball χ_{B(0,R)} or Gaussian exp(-r^2/R^2).
struct DatumConfig {
  std::string kind = "bump";
  double radius = 1.0;
};

struct EvolveConfig {
  std::vector<LorentzExponents> observables{
      LorentzExponents::make(Exponent::finite(1.0), Exponent::finite(1.0)),
      LorentzExponents::make(Exponent::finite(2.0), Exponent::finite(2.0)),
      LorentzExponents::make(Exponent::infinity(), Exponent::infinity())};
};

struct RatesConfig {
  /// The 17-cell sweep built from α, β of the configured A.
  bool table2 = true;
  std::vector<ExponentQuadruple> quadruples;
  double t_lo = 1e2;
  int per_decade = 16;
  double tol_gamma = kDefaultGammaTolerance;
  double tol_delta = kDefaultDeltaTolerance;
  /// Read fits as lower bounds (lower_bound_verdict) rather than two-sided.
  bool lower_bound = true;
  FamilyOptions families;
  bool write_traces = true;
};

struct InvariantsConfig {
  LorentzExponents truncated = LorentzExponents::make(Exponent::finite(4.0), Exponent::finite(4.0));
  double cutoff = 0.5;
  double eps = 0.1;
  double drift_tol = 1e-3;
  double l2_tol = 1e-10;
  double band = 3.0;
  double l1_tol = 0.05;
  double truncated_tol = 0.1;
  double rayleigh_tol = 1e-8;
  std::vector<double> probe_radii{0.5, 1.0, 4.0, 20.0};
};

struct ExperimentConfig {
  int dimension = 3;
  PotentialConfig potential;
  GridConfig grid;
  TimeConfig time;
  DatumConfig datum;
  EvolveConfig evolve;
  RatesConfig rates;
  InvariantsConfig invariants;
  std::string output = "results";
};

/// YAML text. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical YAML; exponents are written exactly ("4/3", "inf").
std::string serialize_config(const ExperimentConfig& config);
/// Throws InvalidArgument on the first violated rule.
void validate(const ExperimentConfig& config);
/// FNV-1a of the canonical text without the output directory, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

PotentialSpec make_potential(const ExperimentConfig& config);
RadialFunction make_datum(const ExperimentConfig& config);
/// Radius 12·sqrt(1 + t_end) + reach unless grid.r_max is set (which must cover it).
GridPtr make_grid(const ExperimentConfig& config, double t_end, double reach = 0.0);

/// 15 regimes of the rate table for N, A > 0 (A ≤ 0 uses the thresholds of A = N/3)
/// plus the p = q = 1 and p = q = 2 anchors.
std::vector<ExponentQuadruple> table2_preset(int dimension, double A);

/// Exponent as exact text: "inf", "3", "4/3".
std::string exponent_text(const Exponent& e);

/// Worker count from DECAYLAB_THREADS, else the hardware concurrency.
int thread_count();

struct CommandResult {
  int exit_code = 0;
  std::string directory;  // <out>/<hash>
  std::string report;     // report.json text
};

CommandResult cmd_harmonic(const ExperimentConfig& config, const std::string& out_root);
CommandResult cmd_evolve(const ExperimentConfig& config, const std::string& out_root);
CommandResult cmd_rates(const ExperimentConfig& config, const std::string& out_root, int threads = thread_count());
CommandResult cmd_invariants(const ExperimentConfig& config, const std::string& out_root);

struct RayleighGate {
  double quotient = 0.0;
  bool admissible = false;
};

/// Minimum Rayleigh quotient over the configured probe radii against V.
RayleighGate rayleigh_gate(const ExperimentConfig& config, const std::function<double(double)>& V);

/// Invariant suite with an explicit gate potential; cmd_invariants gates on the configured V.
CommandResult run_invariants(const ExperimentConfig& config, const std::string& out_root,
                             const std::function<double(double)>& gate_potential);

}  // namespace decaylab
