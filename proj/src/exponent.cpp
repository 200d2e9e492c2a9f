#include "decaylab/exponent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "decaylab/errors.hpp"

namespace decaylab {

Exponent Exponent::finite(double p) {
  if (!std::isfinite(p)) throw InvalidArgument("finite exponent expected, use Exponent::infinity()");
  if (p < 1.0) throw InvalidArgument("exponent must lie in [1, inf]");
  return finite(Rational::from_double(p));
}

Exponent Exponent::finite(const Rational& p) {
  if (p < Rational(1)) throw InvalidArgument("exponent must lie in [1, inf]");
  return Exponent(Rational(1) / p);
}

Exponent Exponent::from_reciprocal(const Rational& r) {
  if (r < Rational(0) || Rational(1) < r) throw InvalidArgument("reciprocal exponent must lie in [0, 1]");
  return Exponent(r);
}

Exponent Exponent::parse(const std::string& text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "inf" || t == "infinity" || t == "∞" || t == "+inf") return infinity();
  if (auto slash = t.find('/'); slash != std::string::npos) {
    long long num = 0, den = 0;
    bool ok = false;
    try {
      std::size_t a = 0, b = 0;
      num = std::stoll(t.substr(0, slash), &a);
      den = std::stoll(t.substr(slash + 1), &b);
      ok = a == slash && b == t.size() - slash - 1 && den > 0;
    } catch (const std::exception&) {
    }
    if (!ok) throw InvalidArgument("cannot parse exponent '" + text + "'");
    return finite(Rational(num, den));
  }
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw InvalidArgument("cannot parse exponent '" + text + "'");
  }
  if (pos != t.size()) throw InvalidArgument("cannot parse exponent '" + text + "'");
  if (std::isinf(v)) return infinity();
  return finite(v);
}

double Exponent::value() const {
  if (is_infinite()) return std::numeric_limits<double>::infinity();
  return static_cast<double>(recip_.den()) / static_cast<double>(recip_.num());
}

std::string Exponent::str() const {
  if (is_infinite()) return "inf";
  std::ostringstream os;
  os.precision(12);
  os << value();
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Exponent& e) { return os << e.str(); }

Exponent holder_conjugate(const Exponent& p) { return p.conjugate(); }

bool LorentzExponents::valid(const Exponent& p, const Exponent& sigma) {
  if (p.is_one() && !sigma.is_one()) return false;
  if (p.is_infinite() && !sigma.is_infinite()) return false;
  return true;
}

LorentzExponents LorentzExponents::make(const Exponent& p, const Exponent& sigma) {
  if (!valid(p, sigma))
    throw InvalidArgument("Lorentz exponents (" + p.str() + ", " + sigma.str() +
                          ") violate: p = 1 requires sigma = 1, p = inf requires sigma = inf");
  return LorentzExponents{p, sigma};
}

std::string LorentzExponents::tag() const { return "L(" + p.str() + "," + sigma.str() + ")"; }

bool is_admissible(const Exponent& p, const Exponent& q, const Exponent& sigma,
                   const Exponent& theta) {
  if (!(p <= q)) return false;
  if (!LorentzExponents::valid(p, sigma) || !LorentzExponents::valid(q, theta)) return false;
  if (p == q && !(sigma <= theta)) return false;
  return true;
}

ExponentQuadruple ExponentQuadruple::make(const Exponent& p, const Exponent& q,
                                          const Exponent& sigma, const Exponent& theta) {
  if (!is_admissible(p, q, sigma, theta))
    throw InvalidArgument("quadruple (" + p.str() + ", " + q.str() + ", " + sigma.str() + ", " +
                          theta.str() + ") is not admissible");
  return ExponentQuadruple{LorentzExponents{p, sigma}, LorentzExponents{q, theta}};
}

ExponentQuadruple ExponentQuadruple::dual() const {
  return make(q().conjugate(), p().conjugate(), theta().conjugate(), sigma().conjugate());
}

std::string ExponentQuadruple::tag() const {
  return "(" + p().str() + "," + q().str() + "," + sigma().str() + "," + theta().str() + ")";
}

}  // namespace decaylab
