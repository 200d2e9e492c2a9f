#include "decaylab/rational.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "decaylab/errors.hpp"

namespace decaylab {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  *this = make(num, den);
}

Rational Rational::make(__int128 num, __int128 den) {
  if (den == 0) throw InvalidArgument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const __int128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  constexpr __int128 lim = std::numeric_limits<std::int64_t>::max();
  if (num > lim || num < -lim || den > lim) throw NumericalFailure("rational overflow");
  Rational r;
  r.num_ = static_cast<std::int64_t>(num);
  r.den_ = static_cast<std::int64_t>(den);
  return r;
}

Rational Rational::from_double(double x, std::int64_t max_den, double tol) {
  if (!std::isfinite(x)) throw InvalidArgument("cannot convert non-finite value to rational");
  // Continued-fraction convergents, stopping at the denominator bound.
  const bool negative = x < 0;
  double v = std::fabs(x);
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double rest = v;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_d = std::floor(rest);
    if (a_d > 9.0e15) break;
    const auto a = static_cast<std::int64_t>(a_d);
    const __int128 h2 = static_cast<__int128>(a) * h1 + h0;
    const __int128 k2 = static_cast<__int128>(a) * k1 + k0;
    if (k2 > max_den || h2 > std::numeric_limits<std::int64_t>::max()) break;
    h0 = h1;
    h1 = static_cast<std::int64_t>(h2);
    k0 = k1;
    k1 = static_cast<std::int64_t>(k2);
    if (std::fabs(static_cast<double>(h1) / static_cast<double>(k1) - v) <= 1e-15 * std::max(1.0, v))
      break;
    const double frac = rest - a_d;
    if (frac < 1e-300) break;
    rest = 1.0 / frac;
  }
  if (k1 == 0) throw InvalidArgument("rational approximation failed");
  const double approx = static_cast<double>(h1) / static_cast<double>(k1);
  if (std::fabs(approx - v) > tol * std::max(1.0, v)) {
    std::ostringstream msg;
    msg << "value " << x << " has no rational approximation with denominator <= " << max_den;
    throw InvalidArgument(msg.str());
  }
  return Rational(negative ? -h1 : h1, k1);
}

std::string Rational::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                        static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::make(static_cast<__int128>(a.num_) * b.num_,
                        static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw InvalidArgument("rational division by zero");
  return Rational::make(static_cast<__int128>(a.num_) * b.den_,
                        static_cast<__int128>(a.den_) * b.num_);
}

bool operator<(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) {
  os << r.num();
  if (r.den() != 1) os << '/' << r.den();
  return os;
}

}  // namespace decaylab
