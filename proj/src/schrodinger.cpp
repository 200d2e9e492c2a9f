#include "decaylab/schrodinger.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "decaylab/errors.hpp"
#include "decaylab/quadrature.hpp"

namespace decaylab {

std::string to_string(Criticality c) { return c == Criticality::Critical ? "critical" : "subcritical"; }

std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::Zero: return "zero";
    case PotentialKind::GroundState: return "ground_state";
    case PotentialKind::InverseSquareTail: return "inverse_square_tail";
  }
  return "?";
}

PotentialKind parse_potential_kind(const std::string& text) {
  if (text == "zero") return PotentialKind::Zero;
  if (text == "ground_state") return PotentialKind::GroundState;
  if (text == "inverse_square_tail") return PotentialKind::InverseSquareTail;
  throw InvalidArgument("unknown potential kind '" + text + "'");
}

namespace {

double hardy_threshold(int n) { return -0.25 * (n - 2.0) * (n - 2.0); }

}  // namespace

PotentialSpec::PotentialSpec(PotentialKind kind, int dimension, double A, double omega, double cutoff)
    : kind_(kind), dimension_(dimension), A_(A), omega_(omega), cutoff_(cutoff) {}

PotentialSpec PotentialSpec::zero(int dimension) {
  require(dimension >= 2, "dimension must be at least 2");
  return PotentialSpec(PotentialKind::Zero, dimension, 0.0, 0.0, 1.0);
}

PotentialSpec PotentialSpec::ground_state(int dimension, double A) { return ground_state_potential(dimension, A); }

PotentialSpec PotentialSpec::inverse_square_tail(int dimension, double omega, double cutoff) {
  require(dimension >= 2, "dimension must be at least 2");
  require(std::isfinite(omega) && omega > hardy_threshold(dimension), "ω must exceed -(N-2)^2/4");
  require(cutoff > 0.0 && std::isfinite(cutoff), "cutoff scale must be positive");
  return PotentialSpec(PotentialKind::InverseSquareTail, dimension, 0.0, omega, cutoff);
}

double PotentialSpec::operator()(double r) const {
  switch (kind_) {
    case PotentialKind::Zero: return 0.0;
    case PotentialKind::GroundState: {
      const double q = 1.0 + r * r;
      return (A_ * (A_ + 2.0 - dimension_) * r * r - A_ * dimension_) / (q * q);
    }
    case PotentialKind::InverseSquareTail: return omega_ / (cutoff_ * cutoff_ + r * r);
  }
  return 0.0;
}

double PotentialSpec::derivative(double r) const {
  switch (kind_) {
    case PotentialKind::Zero: return 0.0;
    case PotentialKind::GroundState: {
      const double a = A_ * (A_ + 2.0 - dimension_), b = A_ * dimension_;
      const double q = 1.0 + r * r;
      return 2.0 * r * (a - a * r * r + 2.0 * b) / (q * q * q);
    }
    case PotentialKind::InverseSquareTail: {
      const double q = cutoff_ * cutoff_ + r * r;
      return -2.0 * omega_ * r / (q * q);
    }
  }
  return 0.0;
}

std::optional<double> PotentialSpec::exact_profile(double r) const {
  switch (kind_) {
    case PotentialKind::Zero: return 1.0;
    case PotentialKind::GroundState: return std::pow(1.0 + r * r, -0.5 * A_);
    case PotentialKind::InverseSquareTail: return std::nullopt;
  }
  return std::nullopt;
}

std::string PotentialSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind_) << "(N=" << dimension_;
  if (kind_ == PotentialKind::GroundState) os << ", A=" << A_;
  if (kind_ == PotentialKind::InverseSquareTail) os << ", omega=" << omega_ << ", cutoff=" << cutoff_;
  os << ")";
  return os.str();
}

double branch_exponent(int dimension, double omega, Criticality branch) {
  require(dimension >= 2, "dimension must be at least 2");
  require(std::isfinite(omega) && omega > hardy_threshold(dimension), "ω must exceed -(N-2)^2/4");
  const double m = dimension - 2.0;
  const double root = std::sqrt(m * m + 4.0 * omega);
  return branch == Criticality::Subcritical ? 0.5 * (m - root) : 0.5 * (m + root);
}

std::pair<double, double> alpha_beta(int dimension, double A) {
  require(dimension >= 2, "dimension must be at least 2");
  require(A > 0.0 && A < 0.5 * dimension, "α, β need 0 < A < N/2");
  return {dimension / (dimension - A), dimension / A};
}

PotentialSpec ground_state_potential(int dimension, double A) {
  require(dimension >= 2, "dimension must be at least 2");
  if (A == 0.0) return PotentialSpec::zero(dimension);
  require(A > 0.0 && A < 0.5 * dimension, "ground-state exponent must lie in (0, N/2)");
  require(std::fabs(A - 0.5 * (dimension - 2.0)) > kHardyGuard,
          "A = (N-2)/2 is the Hardy-critical boundary and is excluded");
  return PotentialSpec(PotentialKind::GroundState, dimension, A, A * (A - dimension + 2.0), 1.0);
}

TailFit estimate_A(const RadialFunction& U, double max_residual) {
  const RadialGrid& g = U.grid();
  const std::vector<double> v = U.nodal_values();
  const double R = g.r_max();
  // The last node of a Dirichlet-style grid may carry 0; only positive samples enter the fit.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.r(i);
    if (r < 0.1 * R || r <= 0.0) continue;
    if (!(v[i] > 0.0)) throw NumericalFailure("estimate_A needs a positive profile on the tail window");
    xs.push_back(std::log(r));
    ys.push_back(-std::log(v[i]));
  }
  if (xs.size() < 3) throw NumericalFailure("tail window holds fewer than three nodes");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double c = my - slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (c + slope * xs[i]);
    ss += e * e;
  }
  TailFit fit{slope, std::sqrt(ss / n), 0.1 * R, R};
  if (fit.residual > max_residual) {
    std::ostringstream os;
    os << "tail fit residual " << fit.residual << " exceeds " << max_residual << "; profile not yet asymptotic";
    throw NumericalFailure(os.str());
  }
  return fit;
}

HarmonicProfile solve_harmonic(const PotentialSpec& V, const GridPtr& grid) {
  namespace odeint = boost::numeric::odeint;
  require(grid != nullptr, "solve_harmonic needs a grid");
  require(grid->dimension() == V.dimension(), "grid and potential dimensions differ");
  const int n = V.dimension();
  using State = std::array<double, 2>;
  auto rhs = [&](const State& y, State& dy, double r) {
    dy[0] = y[1];
    dy[1] = V(r) * y[0] - (n - 1.0) / r * y[1];
  };
  auto stepper = odeint::make_controlled(1e-30, 1e-12, odeint::runge_kutta_dopri5<State>());

  std::vector<double> values(grid->size());
  values[0] = 1.0;
  const double v0 = V(0.0);
  const double r_start = std::min(1e-4, 0.5 * grid->r(1));
  State y{1.0 + v0 * r_start * r_start / (2.0 * n), v0 * r_start / n};
  double r = r_start;
  for (std::size_t i = 1; i < grid->size(); ++i) {
    const double target = grid->r(i);
    odeint::integrate_adaptive(stepper, rhs, y, r, target, 0.1 * (target - r));
    r = target;
    if (!std::isfinite(y[0])) throw NumericalFailure("harmonic profile integration produced non-finite values");
    if (!(y[0] > 0.0)) {
      std::ostringstream os;
      os << "harmonic profile crosses zero near r = " << target << "; potential not admissible at this resolution";
      throw NumericalFailure(os.str());
    }
    values[i] = y[0];
  }

  HarmonicProfile prof;
  RadialFunction raw = RadialFunction::from_nodal(grid, values);
  const TailFit fit = estimate_A(raw, std::numeric_limits<double>::infinity());
  prof.fit_residual = fit.residual;
  prof.A = fit.A;
  prof.criticality = Criticality::Subcritical;
  const double omega = V.omega();
  if (omega > hardy_threshold(n)) {
    const double sub = branch_exponent(n, omega, Criticality::Subcritical);
    const double crit = branch_exponent(n, omega, Criticality::Critical);
    const double ds = std::fabs(fit.A - sub), dc = std::fabs(fit.A - crit);
    if (std::min(ds, dc) <= 0.05) {
      prof.criticality = (dc < ds) ? Criticality::Critical : Criticality::Subcritical;
      prof.A = (dc < ds) ? crit : sub;
    }
  }
  const double scale = std::pow(grid->r_max(), prof.A) * values.back();
  for (double& u : values) u /= scale;
  prof.U = RadialFunction::from_nodal(grid, std::move(values));
  return prof;
}

double rayleigh_check(const std::function<double(double)>& V, const std::vector<RadialFunction>& probes) {
  require(!probes.empty(), "rayleigh_check needs at least one probe");
  const quad::Rule& rule = quad::gauss_legendre(16);
  double best = std::numeric_limits<double>::infinity();
  for (const RadialFunction& phi : probes) {
    require(phi.is_continuous(), "Rayleigh probes must be continuous");
    const RadialGrid& g = phi.grid();
    const int n = g.dimension();
    double energy = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < phi.cells(); ++i) {
      const double a = g.r(i), b = g.r(i + 1), la = phi.left(i), lb = phi.right(i);
      const double slope = (lb - la) / (b - a);
      auto val = [&](double r) { return la + slope * (r - a); };
      energy += slope * slope * (std::pow(b, n) - std::pow(a, n)) / n;
      energy += quad::integrate(rule, a, b, [&](double r) { return V(r) * val(r) * val(r) * std::pow(r, n - 1); });
      mass += quad::integrate(rule, a, b, [&](double r) { return val(r) * val(r) * std::pow(r, n - 1); });
    }
    if (!(mass > 0.0)) throw InvalidArgument("Rayleigh probe vanishes identically");
    best = std::min(best, energy / mass);
  }
  return best;
}

double rayleigh_check(const PotentialSpec& V, const std::vector<RadialFunction>& probes) {
  for (const auto& p : probes) require(p.grid().dimension() == V.dimension(), "probe and potential dimensions differ");
  return rayleigh_check([&V](double r) { return V(r); }, probes);
}

PotentialDiagnostics diagnose_potential(const PotentialSpec& V, double r_hi) {
  require(r_hi > 10.0, "diagnostic range must extend past r = 10");
  PotentialDiagnostics d{};
  d.finite_at_origin = std::isfinite(V(0.0));
  d.omega_estimate = r_hi * r_hi * V(r_hi);
  const int per_decade = 20;
  const int count = static_cast<int>(std::ceil(per_decade * std::log10(r_hi)));
  std::vector<double> xs, ys;
  double sup = 0.0;
  for (int k = 0; k <= count; ++k) {
    const double r = std::pow(10.0, static_cast<double>(k) / per_decade);
    sup = std::max(sup, r * r * r * std::fabs(V.derivative(r)));
    const double dev = std::fabs(r * r * V(r) - V.omega());
    if (r >= 10.0 && dev > 0.0 && std::isfinite(dev)) {
      xs.push_back(std::log(r));
      ys.push_back(std::log(dev));
    }
  }
  d.sup_r3_dV = sup;
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= xs.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    d.correction_order = -sxy / sxx;
  } else {
    d.correction_order = std::numeric_limits<double>::infinity();
  }
  return d;
}

std::vector<RadialFunction> bump_probes(int dimension, const std::vector<double>& radii, int cells) {
  std::vector<RadialFunction> out;
  for (double R : radii) {
    require(R > 0.0, "probe radius must be positive");
    std::vector<double> nodes(cells + 1);
    for (int i = 0; i <= cells; ++i) nodes[i] = R * i / cells;
    auto grid = RadialGrid::from_nodes(dimension, nodes);
    out.push_back(RadialFunction::sample(grid, [R](double r) {
      const double w = 1.0 - (r / R) * (r / R);
      return w > 0.0 ? w * w : 0.0;
    }));
  }
  return out;
}

}  // namespace decaylab
