#pragma once

#include <iosfwd>
#include <string>

#include "decaylab/rational.hpp"

namespace decaylab {

/// A Lebesgue/Lorentz exponent in [1, ∞]. Stored through its reciprocal as an
/// exact rational, so ∞ is the reciprocal 0 and never a large float.
class Exponent {
 public:
  /// Finite exponent; p must lie in [1, ∞).
  static Exponent finite(double p);
  static Exponent finite(const Rational& p);
  static Exponent infinity() { return Exponent(Rational(0)); }
  static Exponent from_reciprocal(const Rational& r);
  /// Accepts a number or one of "inf", "infinity", "∞".
  static Exponent parse(const std::string& text);

  bool is_infinite() const { return recip_ == Rational(0); }
  bool is_one() const { return recip_ == Rational(1); }
  /// +inf for the infinite exponent.
  double value() const;
  const Rational& reciprocal() const { return recip_; }
  /// Reciprocal of the Hölder conjugate, 1 - 1/p.
  Rational conjugate_reciprocal() const { return Rational(1) - recip_; }
  Exponent conjugate() const { return Exponent(conjugate_reciprocal()); }
  std::string str() const;

  friend bool operator==(const Exponent& a, const Exponent& b) { return a.recip_ == b.recip_; }
  /// Ordering of the exponents themselves (larger reciprocal = smaller p).
  friend bool operator<(const Exponent& a, const Exponent& b) { return b.recip_ < a.recip_; }
  friend bool operator<=(const Exponent& a, const Exponent& b) { return !(b < a); }

 private:
  explicit Exponent(Rational recip) : recip_(recip) {}
  Rational recip_{1};
};

std::ostream& operator<<(std::ostream& os, const Exponent& e);

/// p/(p-1); 1 -> ∞; ∞ -> 1.
Exponent holder_conjugate(const Exponent& p);

/// First and second exponent of L^{p,σ}. Invariant: p = 1 forces σ = 1 and
/// p = ∞ forces σ = ∞.
struct LorentzExponents {
  Exponent p = Exponent::finite(2.0);
  Exponent sigma = Exponent::finite(2.0);

  static LorentzExponents make(const Exponent& p, const Exponent& sigma);
  static bool valid(const Exponent& p, const Exponent& sigma);
  std::string tag() const;
  friend bool operator==(const LorentzExponents&, const LorentzExponents&) = default;
};

/// (p, q, σ, θ) as a source/target pair of Lorentz exponents.
struct ExponentQuadruple {
  LorentzExponents source;
  LorentzExponents target;

  /// Throws unless the quadruple lies in the admissible set Λ.
  static ExponentQuadruple make(const Exponent& p, const Exponent& q,
                                const Exponent& sigma, const Exponent& theta);
  const Exponent& p() const { return source.p; }
  const Exponent& q() const { return target.p; }
  const Exponent& sigma() const { return source.sigma; }
  const Exponent& theta() const { return target.sigma; }
  /// (q', p', θ', σ').
  ExponentQuadruple dual() const;
  std::string tag() const;
  friend bool operator==(const ExponentQuadruple&, const ExponentQuadruple&) = default;
};

bool is_admissible(const Exponent& p, const Exponent& q, const Exponent& sigma,
                   const Exponent& theta);

}  // namespace decaylab
