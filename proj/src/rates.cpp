#include "decaylab/rates.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "decaylab/errors.hpp"
#include "decaylab/lorentz.hpp"

namespace decaylab {

namespace {

// Rate table in reciprocal exponents P = 1/p, Q = 1/q, S = 1/σ, T = 1/θ.
// Works for Rational (exact) and double.
template <class X>
std::pair<X, X> rate_table(int n, X A, X P, X Q, X S, X T) {
  const X N(n), half = X(1) / X(2), zero(0), one(1);
  if (A <= zero) return {-half * N * (P - Q), zero};
  const X a = A / N;             // 1/β
  const X ia = (N - A) / N;      // 1/α
  const X s_dual = one - S;      // 1/σ'
  const X bottom = -half * N + A;
  if (P > ia) {  // p < α
    if (Q > a) return {-half * N * (one - Q) + half * A, zero};
    if (Q == a) return {bottom, T};
    return {bottom, zero};
  }
  if (P == ia) {  // p = α
    if (Q > a) return {-half * N * (one - Q) + half * A, s_dual};
    if (Q == a) return {bottom, T + s_dual};
    return {bottom, s_dual};
  }
  const X edge = -half * N * P + half * A;
  if (P > a) {  // α < p < β
    if (Q > a) return {-half * N * (P - Q), zero};
    if (Q == a) return {edge, T};
    return {edge, zero};
  }
  if (P == a) {  // p = β
    if (Q == a) return {zero, T};
    return {edge, zero};
  }
  return {edge, zero};  // p > β
}

std::optional<Rational> exact_A(double A) {
  try {
    Rational r = Rational::from_double(A, 100'000, 1e-13);
    return r;
  } catch (const InvalidArgument&) {
    return std::nullopt;
  }
}

void check_rate_inputs(int n, double A) {
  require(n >= 2, "dimension must be at least 2");
  require(std::isfinite(A) && A < 0.5 * n, "the rate table needs A < N/2");
}

std::string member_tag(const std::string& family, const std::string& label) { return family + ":" + label; }

std::string number(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

// Nodes of a solver-like grid below R with R appended.
GridPtr cap_grid(int n, double R) {
  std::vector<double> nodes;
  nodes.push_back(0.0);
  const double h = std::min(0.02, R / 50.0);
  double r = h, step = h;
  while (r < R * (1 - 1e-9)) {
    nodes.push_back(r);
    if (r >= 10.0) step *= 1.02;
    r += step;
  }
  nodes.push_back(R);
  return RadialGrid::from_nodes(n, std::move(nodes));
}

struct LinearFit {
  Eigen::VectorXd coef;
  double rms;
};

LinearFit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::VectorXd c = X.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd r = y - X * c;
  return {c, std::sqrt(r.squaredNorm() / static_cast<double>(y.size()))};
}

}  // namespace

std::string DecayRate::str() const {
  std::ostringstream os;
  os.precision(6);
  os << "t^{" << gamma << "}";
  if (delta != 0.0) os << " (log t)^{" << delta << "}";
  return os.str();
}

DecayRate theoretical_rate(int n, double A, const ExponentQuadruple& quad) {
  check_rate_inputs(n, A);
  DecayRate out;
  if (auto Ar = exact_A(A)) {
    auto [g, d] = rate_table<Rational>(n, *Ar, quad.p().reciprocal(), quad.q().reciprocal(),
                                       quad.sigma().reciprocal(), quad.theta().reciprocal());
    out.exact_gamma = g;
    out.exact_delta = d;
    out.gamma = g.to_double();
    out.delta = d.to_double();
  } else {
    auto [g, d] = rate_table<double>(n, A, quad.p().reciprocal().to_double(), quad.q().reciprocal().to_double(),
                                     quad.sigma().reciprocal().to_double(), quad.theta().reciprocal().to_double());
    out.gamma = g;
    out.delta = d;
  }
  return out;
}

bool duality_identity(int n, double A, const ExponentQuadruple& quad) {
  const DecayRate a = theoretical_rate(n, A, quad);
  const DecayRate b = theoretical_rate(n, A, quad.dual());
  if (a.exact_gamma && b.exact_gamma) return *a.exact_gamma == *b.exact_gamma && *a.exact_delta == *b.exact_delta;
  return std::fabs(a.gamma - b.gamma) <= 1e-12 && std::fabs(a.delta - b.delta) <= 1e-12;
}

namespace {
std::vector<double> wide_cap_radii(const FamilyOptions& o) {
  std::vector<double> out;
  if (o.wide_cap_reach <= 0) return out;
  for (double R = 32; R <= o.wide_cap_reach * std::sqrt(o.t_max); R *= 2) out.push_back(R);
  return out;
}
}  // namespace

double family_reach(const FamilyOptions& o) {
  double reach = o.bump ? 1.0 : 0.0;
  for (double R : o.ball_radii) reach = std::max(reach, R);
  for (double R : o.profile_cap_radii) reach = std::max(reach, R);
  for (double R : wide_cap_radii(o)) reach = std::max(reach, R);
  if (o.power_caps)
    for (int k = 1; std::pow(o.power_cap_ratio, 2 * k) <= o.t_max; ++k) reach = std::max(reach, std::pow(o.power_cap_ratio, k));
  return reach;
}

std::vector<FamilyMember> default_families(int n, const HarmonicProfile& U, const FamilyOptions& options) {
  std::vector<FamilyMember> out;
  if (options.bump) {
    std::vector<double> nodes(201);
    for (int i = 0; i <= 200; ++i) nodes[i] = i / 200.0;
    out.push_back({"bump", "R=1", RadialFunction::sample(RadialGrid::from_nodes(n, nodes), [](double r) {
                     const double w = 1 - r * r;
                     return w > 0 ? w * w : 0.0;
                   })});
  }
  for (double R : options.ball_radii) {
    require(R > 0, "ball radius must be positive");
    out.push_back({"ball", "R=" + number(R), RadialFunction::sample(RadialGrid::from_nodes(n, {0.0, R}), [](double) { return 1.0; })});
  }
  for (double R : options.profile_cap_radii) {
    require(R > 0 && R <= U.U.grid().r_max(), "profile cap radius must lie inside the harmonic profile grid");
    GridPtr g = cap_grid(n, R);
    out.push_back({"profile_cap", "R=" + number(R), RadialFunction::sample(g, [&](double r) { return U.U(r); })});
  }
  for (double R : wide_cap_radii(options)) {
    require(R <= U.U.grid().r_max(), "wide cap radius must lie inside the harmonic profile grid");
    out.push_back({"wide_cap", "R=" + number(R), RadialFunction::sample(cap_grid(n, R), [&](double r) { return U.U(r); })});
  }
  if (options.power_caps) {
    const double decay = n - U.A;
    require(options.power_cap_ratio > 1.0, "power cap ratio must exceed 1");
    for (int k = 1; std::pow(options.power_cap_ratio, 2 * k) <= options.t_max; ++k) {
      const double R = std::pow(options.power_cap_ratio, k);
      out.push_back({"power_cap", "R=" + number(R),
                     RadialFunction::sample(cap_grid(n, R), [decay](double r) { return std::pow(1.0 + r, -decay); })});
    }
  }
  require(!out.empty(), "the family set is empty");
  return out;
}

std::vector<Observable> observables_for(const std::vector<ExponentQuadruple>& quads) {
  std::vector<Observable> out;
  auto add = [&](const LorentzExponents& e) {
    Observable o{e, Region::Whole, 0.5};
    if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  };
  for (const auto& q : quads) {
    add(q.source);
    add(q.target);
  }
  return out;
}

double evolution_horizon(const CurveSpec& spec) { return 1.5 * spec.t_hi; }

MemberRun run_member(const PotentialSpec& V, const FamilyMember& member, const GridPtr& grid, const TimeGridSpec& time,
                     const std::vector<Observable>& observables, const SchemeOptions& scheme) {
  MemberRun run{member.family, member.label, evolve(V, member.phi, grid, TimeGrid::make(0.0, time), observables, scheme), {}};
  LorentzEvaluator eval(member.phi);
  for (const auto& o : observables)
    run.datum_norms.push_back(o.region == Region::Whole ? eval.norm(o.exps) : std::nan(""));
  return run;
}

std::vector<double> anchor_times(double t_hi) {
  std::vector<double> s{0.0};
  for (double a = 2.0; a <= 0.5 * t_hi; a *= 2.0) s.push_back(a);
  return s;
}

NormCurve empirical_norm_curve(const ExponentQuadruple& quad, const std::vector<MemberRun>& runs, const CurveSpec& spec) {
  require(!runs.empty(), "the family set is empty");
  require(spec.t_lo > 1.0 && spec.t_hi > spec.t_lo && spec.per_decade > 0, "curve window must satisfy 1 < t_lo < t_hi");
  const Observable src{quad.source, Region::Whole, 0.5}, dst{quad.target, Region::Whole, 0.5};
  const std::vector<double> anchors = anchor_times(spec.t_hi);
  const int count = static_cast<int>(std::round(std::log10(spec.t_hi / spec.t_lo) * spec.per_decade));
  NormCurve curve{quad, {}};
  for (int j = 0; j <= std::max(count, 1); ++j) {
    const double t = j == count ? spec.t_hi : spec.t_lo * std::pow(10.0, static_cast<double>(j) / spec.per_decade);
    NormSample best{t, 0.0, "", 0.0};
    for (const auto& run : runs) {
      const EvolutionTrace& tr = run.trace;
      const std::size_t is = tr.observable_index(src), id = tr.observable_index(dst);
      for (double s : anchors) {
        if (s + t > tr.times.back() * (1 + 1e-12)) break;
        const double den = s == 0.0 ? run.datum_norms[is] : tr.value_at(is, s);
        if (!(den > 1e-280) || !std::isfinite(den))
          throw NumericalFailure("denominator norm underflowed for " + member_tag(run.family, run.label) + " at s = " + number(s));
        const double ratio = tr.value_at(id, s + t) / den;
        if (ratio > best.estimate) best = {t, ratio, member_tag(run.family, run.label), s};
      }
    }
    if (!(best.estimate > 0.0)) throw NumericalFailure("no positive estimate at t = " + number(t));
    curve.samples.push_back(best);
    if (count == 0) break;
  }
  return curve;
}

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& v) {
  require(t.size() == v.size() && t.size() >= 3, "fit needs at least three samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    require(t[i] > 1.0 && std::isfinite(t[i]), "fit times must exceed 1");
    require(v[i] > 0.0 && std::isfinite(v[i]), "fit values must be positive");
    if (i > 0) require(t[i] > t[i - 1], "fit times must increase");
  }
  const std::size_t n = t.size();
  RateFit fit;
  fit.t_lo = t.front();
  fit.t_hi = t.back();
  fit.delta_identified = fit.t_hi / fit.t_lo >= 1e4 * (1 - 1e-9);
  fit.ill_conditioned = std::log(std::log(fit.t_hi)) - std::log(std::log(fit.t_lo)) < 0.5;

  Eigen::VectorXd x(n), y(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(t[i]);
    y[i] = std::log(v[i]);
    z[i] = std::log(x[i]);
  }

  // Stage 1: top two decades, δ = 0.
  std::vector<Eigen::Index> top;
  for (std::size_t i = 0; i < n; ++i)
    if (t[i] >= fit.t_hi / 100.0 * (1 - 1e-12)) top.push_back(static_cast<Eigen::Index>(i));
  require(top.size() >= 2, "fit needs samples in the top two decades");
  Eigen::MatrixXd X1(top.size(), 2);
  Eigen::VectorXd y1(top.size());
  for (std::size_t k = 0; k < top.size(); ++k) {
    X1(k, 0) = 1.0;
    X1(k, 1) = x[top[k]];
    y1[k] = y[top[k]];
  }
  const LinearFit s1 = least_squares(X1, y1);
  fit.stage1_gamma = s1.coef[1];

  if (!fit.delta_identified) {
    Eigen::MatrixXd X(n, 2);
    X.col(0).setOnes();
    X.col(1) = x;
    const LinearFit f = least_squares(X, y);
    fit.intercept = f.coef[0];
    fit.gamma = f.coef[1];
    fit.delta = 0.0;
    fit.residual = f.rms;
    return fit;
  }

  // Stage 2: δ from the stage-1 residual.
  Eigen::MatrixXd X2(n, 2);
  X2.col(0).setOnes();
  X2.col(1) = z;
  const Eigen::VectorXd r1 = y - (s1.coef[0] * Eigen::VectorXd::Ones(n) + s1.coef[1] * x);
  fit.stage2_delta = least_squares(X2, r1).coef[1];

  // Stage 3: joint refinement. The model is linear in (c, γ, δ), so this is the
  // joint least-squares solution; stages 1-2 are kept as diagnostics.
  Eigen::MatrixXd X(n, 3);
  X.col(0).setOnes();
  X.col(1) = x;
  X.col(2) = z;
  const LinearFit f = least_squares(X, y);
  fit.intercept = f.coef[0];
  fit.gamma = f.coef[1];
  fit.delta = f.coef[2];
  fit.residual = f.rms;
  return fit;
}

RateFit fit_rate(const NormCurve& curve) {
  std::vector<double> t, v;
  for (const auto& s : curve.samples) {
    t.push_back(s.t);
    v.push_back(s.estimate);
  }
  return fit_rate(t, v);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict verdict(const RateFit& fit, const DecayRate& theory, double tol_gamma, double tol_delta) {
  require(tol_gamma > 0 && tol_delta > 0, "tolerances must be positive");
  if (fit.ill_conditioned) return Verdict::Inconclusive;
  if (!fit.delta_identified && theory.delta != 0.0) return Verdict::Inconclusive;
  const bool g_ok = std::fabs(fit.gamma - theory.gamma) <= tol_gamma;
  const bool d_ok = !fit.delta_identified || std::fabs(fit.delta - theory.delta) <= tol_delta;
  return g_ok && d_ok ? Verdict::Pass : Verdict::Fail;
}

Verdict lower_bound_verdict(const RateFit& fit, const DecayRate& theory, double tol_gamma, double tol_delta) {
  const Verdict v = verdict(fit, theory, tol_gamma, tol_delta);
  if (v != Verdict::Fail) return v;
  // Compare growth over the window, not γ and δ one at a time: the two are
  // nearly collinear and a fit can trade one for the other.
  require(fit.t_lo > 1.0 && fit.t_hi > fit.t_lo, "fit window must lie in (1, inf)");
  const double L = std::log(fit.t_hi / fit.t_lo);
  const double M = std::log(std::log(fit.t_hi) / std::log(fit.t_lo));
  const double fitted = fit.gamma * L + fit.delta * M;
  const double theory_growth = theory.gamma * L + theory.delta * M;
  return fitted < theory_growth ? Verdict::Inconclusive : Verdict::Fail;
}

TruncatedSup truncated_boundedness(const EvolutionTrace& trace, const LorentzExponents& exps, double cutoff, double t_max) {
  require(exps.p.reciprocal() < Rational(1, 2), "truncated boundedness needs p > 2");
  require(cutoff > 0.0, "cutoff must be positive");
  const std::size_t o = trace.observable_index(Observable{exps, Region::Outer, cutoff});
  const double base = lorentz_norm(trace.snapshots.front(), exps);
  require(base > 0.0, "initial datum has zero norm");
  TruncatedSup out;
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    const double t = trace.times[k];
    if (t < 2.0 || t > t_max) continue;
    const double r = trace.values[o][k] / base;
    if (r > out.sup) out = {r, t};
  }
  return out;
}

RateFit l1_growth(const EvolutionTrace& trace, double t_lo) {
  const LorentzExponents l1 = LorentzExponents::make(Exponent::finite(1.0), Exponent::finite(1.0));
  const std::size_t o = trace.observable_index(Observable{l1, Region::Whole, 0.5});
  const double t_hi = trace.times.back();
  require(t_hi > t_lo, "trace ends before the fit window");
  std::vector<double> t, v;
  const int count = static_cast<int>(std::ceil(std::log10(t_hi / t_lo) * 16));
  for (int j = 0; j <= count; ++j) {
    const double s = j == count ? t_hi : t_lo * std::pow(t_hi / t_lo, static_cast<double>(j) / count);
    t.push_back(s);
    v.push_back(trace.value_at(o, s));
  }
  return fit_rate(t, v);
}

}  // namespace decaylab
