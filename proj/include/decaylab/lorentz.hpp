#pragma once

#include <optional>
#include <vector>

#include "decaylab/exponent.hpp"
#include "decaylab/radial.hpp"

namespace decaylab {

/// μ(λ) = |{x : |f(x)| > λ}|, exact for the piecewise-linear interpolant.
double distribution_function(const RadialFunction& f, double lambda);

/// Non-increasing profile in the measure coordinate s = c_N r^N. Stored on
/// radius breakpoints r_k = (s_k / c_N)^{1/N} with one-sided values per segment,
/// linear in the radius between breakpoints.
struct DecreasingProfile {
  int dimension = 2;
  std::vector<double> breakpoints;  // s_0 = 0 < s_1 < ...
  std::vector<double> left;         // value at s_k^+ for segment k
  std::vector<double> right;        // value at s_{k+1}^- for segment k

  /// Right-continuous f*(s); 0 beyond the last breakpoint.
  double operator()(double s) const;
  bool is_nonincreasing() const;
};

/// Level-set sweep of |f|: the range [0, sup|f|] is cut at every cell endpoint
/// value, and on each open piece μ is an explicit degree-N expression in λ
/// built from the cells whose value range straddles the piece.
class LayerCake {
 public:
  explicit LayerCake(const RadialFunction& f);

  int dimension() const { return dimension_; }
  double sup() const { return sup_; }
  /// μ(0+), measure of the support.
  double support_measure() const;
  /// Right-continuous μ(λ).
  double measure(double lambda) const;
  /// f*(s) = inf{λ > 0 : μ(λ) ≤ s}.
  double rearranged(double s) const;
  /// Lorentz norm from c_N^{1-σ/p} p ∫ λ^{σ-1} μ(λ)^{σ/p} dλ (σ < ∞) or
  /// c_N^{-1/p} sup λ μ(λ)^{1/p} (σ = ∞).
  double lorentz_norm(const LorentzExponents& e) const;
  /// f♯ as a radial function, refined until the linear-in-r interpolant is
  /// within rel_tol · sup|f| of the exact rearrangement.
  RadialFunction spherical(double rel_tol = 1e-10) const;

 private:
  struct Cell {
    double a, b;      // radii
    double lo, hi;    // value range
    bool increasing;  // value grows with r
  };
  struct Piece {
    double lo, hi;
    double full;                // measure of cells lying entirely above the piece
    std::vector<int> active;    // cells straddling the piece
    int top_order = 0;          // order of vanishing of μ at hi (top piece only)
  };
  /// μ on piece k at λ = hi - y, with y passed separately to retain precision near hi.
  double piece_measure(const Piece& piece, double y) const;
  double piece_sup(const Piece& piece, double inv_p) const;

  int dimension_;
  double ball_volume_;
  double sup_ = 0.0;
  std::vector<Cell> cells_;
  std::vector<Piece> pieces_;
};

DecreasingProfile decreasing_rearrangement(const RadialFunction& f);
RadialFunction spherical_rearrangement(const RadialFunction& f);

/// ‖f‖_{L^{p,σ}}. For p = ∞ this is sup|f|. Non-increasing nonnegative inputs
/// (f♯ = f) go through per-cell radial quadrature; others through the layer cake.
double lorentz_norm(const RadialFunction& f, const LorentzExponents& e);
/// Per-cell quadrature of N c_N ∫ r^{Nσ/p - 1} f(r)^σ dr; requires f♯ = f.
double lorentz_norm_radial(const RadialFunction& f, const LorentzExponents& e);
/// Layer-cake route regardless of monotonicity.
double lorentz_norm_layer_cake(const RadialFunction& f, const LorentzExponents& e);

/// Ordinary L^p norm by direct per-cell quadrature of |f|^p against N c_N r^{N-1}.
double lp_norm(const RadialFunction& f, const Exponent& p);

/// Evaluates several Lorentz norms of one function, sharing the layer-cake sweep.
class LorentzEvaluator {
 public:
  explicit LorentzEvaluator(const RadialFunction& f);
  double norm(const LorentzExponents& e) const;

 private:
  const RadialFunction* f_;
  bool monotone_;
  mutable std::optional<LayerCake> cake_;
};

struct TruncatedNorms {
  double inner;  // |x| <= δ(1+t)^{1/2}
  double outer;  // |x| >  δ(1+t)^{1/2}
};

/// Lorentz norms of (1-χ_δ(t)) f and χ_δ(t) f, χ_δ(t) = indicator of |x| > δ(1+t)^{1/2}.
TruncatedNorms truncated_norms(const RadialFunction& f, const LorentzExponents& e, double delta, double t);

}  // namespace decaylab
