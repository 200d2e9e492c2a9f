#include "decaylab/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <tuple>

#include "decaylab/errors.hpp"

namespace decaylab::quad {

Rule gauss_jacobi(int n, double a, double b) {
  require(n >= 1, "quadrature order must be positive");
  require(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(std::max(n - 1, 1));
  const double ab = a + b;
  diag(0) = (b - a) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + ab;
    diag(k) = (b * b - a * a) / (s * (s + 2.0));
    const double num = 4.0 * k * (k + a) * (k + b) * (k + ab);
    const double den = s * s * (s + 1.0) * (s - 1.0);
    off(k - 1) = std::sqrt(num / den);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  if (n == 1) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = diag(0);
    solver.compute(m);
  } else {
    solver.computeFromTridiagonal(diag, off.head(n - 1));
  }
  if (solver.info() != Eigen::Success) throw NumericalFailure("Golub-Welsch eigen-solve failed");
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                              std::lgamma(ab + 2.0));
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

const Rule& gauss_jacobi_cached(int n, double a, double b) {
  thread_local std::map<std::tuple<int, double, double>, Rule> cache;
  const auto key = std::make_tuple(n, a, b);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, gauss_jacobi(n, a, b)).first;
  return it->second;
}

const Rule& gauss_legendre(int n) {
  static const Rule r4 = gauss_jacobi(4, 0.0, 0.0);
  static const Rule r8 = gauss_jacobi(8, 0.0, 0.0);
  static const Rule r16 = gauss_jacobi(16, 0.0, 0.0);
  static const Rule r32 = gauss_jacobi(32, 0.0, 0.0);
  switch (n) {
    case 4: return r4;
    case 8: return r8;
    case 16: return r16;
    case 32: return r32;
    default: throw InvalidArgument("unsupported Gauss-Legendre order");
  }
}

}  // namespace decaylab::quad
