#include "decaylab/heat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "decaylab/errors.hpp"
#include "decaylab/lorentz.hpp"
#include "decaylab/quadrature.hpp"
#include "json.hpp"

namespace decaylab {

double auto_r_max(double t_end) {
  require(t_end >= 0.0, "t_end must be nonnegative");
  return 12.0 * std::sqrt(1.0 + t_end);
}

TimeGrid TimeGrid::make(double t_start, const TimeGridSpec& spec) {
  require(t_start >= 0.0 && spec.t_end > t_start, "time grid needs 0 <= t_start < t_end");
  require(spec.h0 > 0.0, "initial step must be positive");
  require(spec.ratio > 1.0 && spec.ratio <= 1.05, "step growth ratio must lie in (1, 1.05]");
  require(spec.cap > 0.0, "step cap must be positive");
  require(spec.startup_steps >= 0, "startup step count must be nonnegative");
  TimeGrid g;
  g.spec_ = spec;
  g.startup_steps_ = spec.startup_steps;
  std::vector<double> targets;
  for (int k = spec.min_dyadic_exponent; k < 80; ++k) {
    const double s = std::ldexp(1.0, k);
    if (s > spec.t_end) break;
    if (s > t_start) targets.push_back(s);
  }
  if (targets.empty() || targets.back() < spec.t_end) targets.push_back(spec.t_end);
  g.times_.push_back(t_start);
  g.snapshot_.push_back(true);
  double t = t_start, dt = spec.h0;
  std::size_t next = 0;
  while (next < targets.size()) {
    const double step = std::min(dt, spec.cap);
    const double target = targets[next];
    double t_new = t + step;
    bool snap = false;
    if (t_new >= target || target - t_new < 0.25 * step) {
      t_new = target;
      snap = true;
      ++next;
    }
    g.times_.push_back(t_new);
    g.snapshot_.push_back(snap);
    t = t_new;
    dt *= spec.ratio;
  }
  return g;
}

TimeGrid TimeGrid::resumed_at(double t) const {
  auto it = std::find(times_.begin(), times_.end(), t);
  require(it != times_.end() && it + 1 != times_.end(), "resume time must be an interior grid time");
  const auto k = static_cast<std::size_t>(it - times_.begin());
  TimeGrid g;
  g.spec_ = spec_;
  g.times_.assign(times_.begin() + k, times_.end());
  g.snapshot_.assign(snapshot_.begin() + k, snapshot_.end());
  g.snapshot_.front() = true;
  g.startup_steps_ = std::max(0, startup_steps_ - static_cast<int>(k));
  g.spec_.startup_steps = g.startup_steps_;
  return g;
}

std::string to_string(Region r) {
  switch (r) {
    case Region::Whole: return "whole";
    case Region::Inner: return "inner";
    case Region::Outer: return "outer";
  }
  return "?";
}

std::string Observable::tag() const {
  std::string t = exps.tag();
  if (region != Region::Whole) {
    std::ostringstream os;
    os.precision(12);
    os << "|" << to_string(region) << "@" << cutoff;
    t += os.str();
  }
  return t;
}

DiscreteOperator build_operator(const PotentialSpec& V, const GridPtr& grid) {
  require(grid != nullptr, "operator needs a grid");
  require(grid->dimension() == V.dimension(), "grid and potential dimensions differ");
  const int n = grid->dimension();
  const std::size_t m = grid->size() - 1;
  require(m >= 2, "operator needs at least three nodes");
  const double c = grid->ball_volume();
  DiscreteOperator op;
  op.dimension = n;
  op.weight.resize(m);
  op.conductance.resize(m);
  op.potential.resize(m);
  op.harmonic.resize(m + 1);
  double face_lo = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double face_hi = 0.5 * (grid->r(i) + grid->r(i + 1));
    op.weight[i] = c * (std::pow(face_hi, n) - std::pow(face_lo, n));
    op.conductance[i] = n * c * std::pow(face_hi, n - 1) / (grid->r(i + 1) - grid->r(i));
    face_lo = face_hi;
  }
  switch (V.kind()) {
    case PotentialKind::Zero:
      std::fill(op.potential.begin(), op.potential.end(), 0.0);
      std::fill(op.harmonic.begin(), op.harmonic.end(), 1.0);
      break;
    case PotentialKind::GroundState: {
      for (std::size_t i = 0; i <= m; ++i) op.harmonic[i] = *V.exact_profile(grid->r(i));
      for (std::size_t i = 0; i < m; ++i) {
        double lu = op.conductance[i] * (op.harmonic[i] - op.harmonic[i + 1]);
        if (i > 0) lu += op.conductance[i - 1] * (op.harmonic[i] - op.harmonic[i - 1]);
        op.potential[i] = -lu / (op.weight[i] * op.harmonic[i]);
      }
      break;
    }
    case PotentialKind::InverseSquareTail: {
      for (std::size_t i = 0; i < m; ++i) op.potential[i] = V(grid->r(i));
      op.harmonic[0] = 1.0;
      for (std::size_t i = 0; i < m; ++i) {
        // Row i of K U = 0 solved for U_{i+1}.
        double rest = op.weight[i] * op.potential[i] * op.harmonic[i] + op.conductance[i] * op.harmonic[i];
        if (i > 0) rest += op.conductance[i - 1] * (op.harmonic[i] - op.harmonic[i - 1]);
        op.harmonic[i + 1] = rest / op.conductance[i];
        if (!(op.harmonic[i + 1] > 0.0)) {
          std::ostringstream os;
          os << "discrete harmonic profile crosses zero near r = " << grid->r(i + 1)
             << "; the discrete operator is not nonnegative";
          throw NumericalFailure(os.str());
        }
      }
      break;
    }
  }
  return op;
}

std::vector<double> project_to_nodes(const RadialFunction& phi, const DiscreteOperator& op, const RadialGrid& grid) {
  require(phi.grid().dimension() == grid.dimension(), "datum and grid dimensions differ");
  const int n = grid.dimension();
  const std::size_t m = grid.size() - 1;
  const quad::Rule& rule = quad::gauss_legendre(16);
  const RadialGrid& pg = phi.grid();
  std::vector<double> u(m, 0.0);
  double face_lo = 0.0;
  std::size_t cell = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double face_hi = 0.5 * (grid.r(i) + grid.r(i + 1));
    double total = 0.0;
    double a = face_lo;
    while (a < face_hi && cell < phi.cells()) {
      const double ca = pg.r(cell), cb = pg.r(cell + 1);
      if (cb <= a) {
        ++cell;
        continue;
      }
      const double b = std::min(face_hi, cb);
      const double la = phi.left(cell), lb = phi.right(cell);
      total += quad::integrate(rule, a, b, [&](double r) {
        return (la + (lb - la) * (r - ca) / (cb - ca)) * std::pow(r, n - 1);
      });
      a = b;
      if (b >= cb) ++cell;
    }
    u[i] = n * grid.ball_volume() * total / op.weight[i];
    face_lo = face_hi;
  }
  return u;
}

namespace {

// Solves the symmetric tridiagonal system (diag, off) x = rhs in place.
void thomas(std::vector<double>& diag, const std::vector<double>& off, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double f = off[i - 1] / diag[i - 1];
    diag[i] -= f * off[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - off[i] * rhs[i + 1]) / diag[i];
}

RadialFunction nodal_function(const GridPtr& grid, const std::vector<double>& u) {
  std::vector<double> v(u);
  v.push_back(0.0);
  return RadialFunction::from_nodal(grid, std::move(v));
}

}  // namespace

std::size_t EvolutionTrace::observable_index(const Observable& o) const {
  for (std::size_t i = 0; i < observables.size(); ++i)
    if (observables[i] == o) return i;
  throw InvalidArgument("observable " + o.tag() + " was not recorded");
}

double EvolutionTrace::value_at(std::size_t obs, double t) const {
  require(obs < values.size(), "observable index out of range");
  require(t >= times.front() && t <= times.back() * (1 + 1e-12), "time outside the recorded range");
  const auto& v = values[obs];
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return v.back();
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  if (*it == t) return v[k];
  const double t0 = times[k - 1], t1 = times[k], v0 = v[k - 1], v1 = v[k];
  if (t0 > 0.0 && v0 > 0.0 && v1 > 0.0) {
    const double w = std::log(t / t0) / std::log(t1 / t0);
    return std::exp(std::log(v0) + w * (std::log(v1) - std::log(v0)));
  }
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

bool EvolutionTrace::has_snapshot(double t) const {
  for (double s : snapshot_times)
    if (std::fabs(s - t) <= 1e-12 * std::max(1.0, t)) return true;
  return false;
}

const RadialFunction& EvolutionTrace::snapshot_at(double t) const {
  for (std::size_t i = 0; i < snapshot_times.size(); ++i)
    if (std::fabs(snapshot_times[i] - t) <= 1e-12 * std::max(1.0, t)) return snapshots[i];
  throw InvalidArgument("no snapshot stored at the requested time");
}

std::string EvolutionTrace::header_json() const {
  nlohmann::ordered_json h;
  h["potential"] = potential;
  h["dimension"] = dimension;
  nlohmann::ordered_json g;
  g["nodes"] = grid->size();
  g["r_max"] = grid->r_max();
  if (grid->spacing()) {
    g["inner_spacing"] = grid->spacing()->inner_spacing;
    g["inner_radius"] = grid->spacing()->inner_radius;
    g["ratio"] = grid->spacing()->ratio;
  }
  h["grid"] = g;
  nlohmann::ordered_json s;
  s["scheme"] = "crank_nicolson";
  s["startup_implicit_euler_steps"] = time_spec.startup_steps;
  s["h0"] = time_spec.h0;
  s["step_ratio"] = time_spec.ratio;
  s["step_cap"] = std::isfinite(time_spec.cap) ? nlohmann::ordered_json(time_spec.cap) : nlohmann::ordered_json("inf");
  s["t_end"] = time_spec.t_end;
  h["scheme"] = s;
  nlohmann::ordered_json tol;
  tol["leakage_budget"] = options.leakage_budget;
  tol["positivity_tolerance"] = options.positivity_tolerance;
  h["tolerances"] = tol;
  h["leakage"] = leakage;
  std::vector<std::string> tags;
  for (const auto& o : observables) tags.push_back(o.tag());
  h["observables"] = tags;
  return h.dump();
}

void EvolutionTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write trace file " + path);
  out << "# " << header_json() << "\n";
  out << "t,norm_tag,value\n";
  char buf[64];
  auto row = [&](double t, const std::string& tag, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", t);
    out << buf << "," << tag << ",";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << "\n";
  };
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t o = 0; o < observables.size(); ++o) row(times[k], observables[o].tag(), values[o][k]);
    row(times[k], "pairing", pairing[k]);
    row(times[k], "l2_scheme", l2_scheme[k]);
  }
}

EvolutionTrace evolve(const PotentialSpec& V, const RadialFunction& phi, const GridPtr& grid, const TimeGrid& tg,
                      const std::vector<Observable>& observables, const SchemeOptions& options) {
  require(grid != nullptr, "evolve needs a grid");
  if (options.enforce_domain_rule)
    require(grid->r_max() >= auto_r_max(tg.t_end()) * (1 - 1e-12), "R_max must be at least 12·sqrt(1 + t_end)");
  require(phi.all_finite(), "initial datum must be finite");
  DiscreteOperator op = build_operator(V, grid);
  const std::size_t m = grid->size() - 1;

  EvolutionTrace tr;
  tr.potential = V.describe();
  tr.dimension = grid->dimension();
  tr.grid = grid;
  tr.time_spec = tg.spec();
  tr.options = options;
  tr.observables = observables;
  tr.values.assign(observables.size(), {});
  tr.lumped_weights = op.weight;
  tr.discrete_harmonic = op.harmonic;

  std::vector<double> u;
  if (options.project_datum) {
    u = project_to_nodes(phi, op, *grid);
  } else {
    require(std::ranges::equal(phi.grid().nodes(), grid->nodes()), "nodal datum must live on the solver grid");
    u = phi.nodal_values();
    u.resize(op.weight.size());
  }
  tr.nonnegative_datum = std::all_of(phi.left_values().begin(), phi.left_values().end(), [](double v) { return v >= 0; }) &&
                         std::all_of(phi.right_values().begin(), phi.right_values().end(), [](double v) { return v >= 0; });
  const double floor = -options.positivity_tolerance * std::max(phi.max_abs(), 1e-300);

  auto pairing = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += op.weight[i] * op.harmonic[i] * x[i];
    return s;
  };
  const double p0 = pairing(u);

  auto record = [&](double t, bool snapshot) {
    for (double v : u)
      if (!std::isfinite(v)) throw NumericalFailure("solution became non-finite");
    const double lo = *std::min_element(u.begin(), u.end());
    if (tr.nonnegative_datum && lo < floor) {
      std::ostringstream os;
      os << "positivity lost at t = " << t << " (min " << lo << ")";
      throw NumericalFailure(os.str());
    }
    RadialFunction f = nodal_function(grid, u);
    double l2 = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      l2 += op.weight[i] * u[i] * u[i];
      sup = std::max(sup, std::fabs(u[i]));
    }
    tr.times.push_back(t);
    tr.pairing.push_back(pairing(u));
    tr.l2_scheme.push_back(std::sqrt(l2));
    tr.sup_norm.push_back(sup);
    tr.min_value.push_back(lo);
    LorentzEvaluator whole(f);
    std::map<std::pair<int, double>, RadialFunction> pieces;
    for (std::size_t o = 0; o < observables.size(); ++o) {
      const Observable& ob = observables[o];
      double v;
      if (ob.region == Region::Whole) {
        v = whole.norm(ob.exps);
      } else {
        const auto key = std::make_pair(static_cast<int>(ob.region), ob.cutoff);
        auto it = pieces.find(key);
        if (it == pieces.end()) {
          const double rho = ob.cutoff * std::sqrt(1.0 + t);
          RadialFunction part = ob.region == Region::Inner
                                    ? f.restricted(0.0, rho)
                                    : (rho < grid->r_max() ? f.restricted(rho, INFINITY) : f.scaled(0.0));
          it = pieces.emplace(key, std::move(part)).first;
        }
        v = lorentz_norm(it->second, ob.exps);
      }
      tr.values[o].push_back(v);
    }
    if (snapshot) {
      tr.snapshot_times.push_back(t);
      tr.snapshots.push_back(std::move(f));
    }
  };

  record(tg.t_start(), true);
  const auto& times = tg.times();
  std::vector<double> diag(m), off(m - 1), rhs(m);
  double leaked = 0.0;
  const double kb = op.conductance[m - 1] * op.harmonic[m];
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    const double theta = static_cast<int>(k) < tg.startup_steps() ? 1.0 : 0.5;
    // K u: diag_i = κ_{i-1/2} + κ_{i+1/2} + w_i V_i, off_i = -κ_{i+1/2}.
    for (std::size_t i = 0; i < m; ++i) {
      const double kd = op.conductance[i] + (i > 0 ? op.conductance[i - 1] : 0.0) + op.weight[i] * op.potential[i];
      double ku = kd * u[i];
      if (i > 0) ku -= op.conductance[i - 1] * u[i - 1];
      if (i + 1 < m) ku -= op.conductance[i] * u[i + 1];
      rhs[i] = op.weight[i] * u[i] - (1.0 - theta) * dt * ku;
      diag[i] = op.weight[i] + theta * dt * kd;
      if (i + 1 < m) off[i] = -theta * dt * op.conductance[i];
    }
    const double old_edge = u[m - 1];
    thomas(diag, off, rhs);
    u.swap(rhs);
    leaked += dt * kb * (theta * u[m - 1] + (1.0 - theta) * old_edge);
    if (p0 != 0.0 && std::fabs(leaked / p0) > options.leakage_budget) {
      std::ostringstream os;
      os << "boundary flux exceeded the truncation budget at t = " << times[k + 1]
         << " (domain too small; relative leakage " << leaked / p0 << ")";
      throw NumericalFailure(os.str());
    }
    record(times[k + 1], tg.is_snapshot(k + 1));
  }
  tr.leakage = p0 != 0.0 ? leaked / p0 : 0.0;
  return tr;
}

namespace {

std::vector<double> profile_at_nodes(const EvolutionTrace& trace, const HarmonicProfile& U) {
  const RadialGrid& g = *trace.grid;
  const RadialGrid& ug = U.U.grid();
  require(ug.dimension() == g.dimension(), "trace and profile dimensions differ");
  require(ug.r_max() >= g.r(g.size() - 2), "harmonic profile grid does not cover the trace grid");
  std::vector<double> v(g.size() - 1);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) v[i] = U.U(g.r(i));
  return v;
}

}  // namespace

DriftReport conserved_pairing(const EvolutionTrace& trace, const HarmonicProfile& U) {
  const std::vector<double> uv = profile_at_nodes(trace, U);
  auto pair = [&](const RadialFunction& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < uv.size(); ++i) s += trace.lumped_weights[i] * uv[i] * f.left(i);
    return s;
  };
  const double p0 = pair(trace.snapshots.front());
  DriftReport rep{0.0, trace.snapshot_times.front()};
  for (std::size_t k = 0; k < trace.snapshots.size(); ++k) {
    const double d = std::fabs(pair(trace.snapshots[k]) - p0) / std::fabs(p0);
    if (d > rep.max_drift) rep = {d, trace.snapshot_times[k]};
  }
  return rep;
}

DriftReport discrete_pairing_drift(const EvolutionTrace& trace) {
  const double p0 = trace.pairing.front();
  DriftReport rep{0.0, trace.times.front()};
  for (std::size_t k = 0; k < trace.pairing.size(); ++k) {
    const double d = std::fabs(trace.pairing[k] - p0) / std::fabs(p0);
    if (d > rep.max_drift) rep = {d, trace.times[k]};
  }
  return rep;
}

std::vector<LowerRatio> interior_lower_ratio(const EvolutionTrace& trace, const HarmonicProfile& U, double eps) {
  require(eps > 0.0, "ε must be positive");
  const std::vector<double> uv = profile_at_nodes(trace, U);
  const RadialGrid& g = *trace.grid;
  const int n = g.dimension();
  std::vector<LowerRatio> out;
  for (std::size_t k = 0; k < trace.snapshots.size(); ++k) {
    const double t = trace.snapshot_times[k];
    if (t < 2.0) continue;
    const double rho = eps * std::sqrt(1.0 + t);
    const double scale = std::pow(t, 0.5 * n - U.A);
    double best = INFINITY;
    for (std::size_t i = 0; i < uv.size() && g.r(i) <= rho; ++i)
      best = std::min(best, trace.snapshots[k].left(i) * scale / uv[i]);
    out.push_back({t, best});
  }
  return out;
}

}  // namespace decaylab
