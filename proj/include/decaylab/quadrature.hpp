#pragma once

#include <utility>
#include <vector>

namespace decaylab::quad {

struct Rule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss–Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1] (Golub–Welsch).
Rule gauss_jacobi(int n, double a, double b);

/// Memoized gauss_jacobi (per thread); references stay valid for the thread lifetime.
const Rule& gauss_jacobi_cached(int n, double a, double b);

/// Cached Gauss–Legendre rule; n in {4, 8, 16, 32}.
const Rule& gauss_legendre(int n);

/// Integral over [lo, hi] of f with the fixed-order Legendre rule.
template <class F>
double integrate(const Rule& rule, double lo, double hi, F&& f) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double s = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * f(mid + half * rule.nodes[k]);
  return s * half;
}

}  // namespace decaylab::quad
