// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
//
//   decaylab_acceptance [--expect-fail 3,4]
//
// Exit 0 iff every criterion passes, or with --expect-fail iff exactly the
// listed criteria fail. Failing lines are printed as FAIL either way.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "decaylab/heat.hpp"
#include "decaylab/lorentz.hpp"
#include "decaylab/rates.hpp"
#include "decaylab/schrodinger.hpp"

using namespace decaylab;

namespace {

// Tolerances.
constexpr double kTolGamma = 0.05;
constexpr double kTolDelta = 0.15;
constexpr double kTolGap = 0.2;
constexpr double kTolL1 = 0.05;
constexpr double kTolDrift = 1e-3;
constexpr double kTolL2 = 1e-10;
constexpr double kTolBall = 1e-8;
constexpr double kTolLpp = 1e-6;
constexpr double kTolHarmonic = 0.01;
constexpr double kTolTruncated = 0.10;
constexpr int kMinSweep = 200;
// Runtime budgets in seconds.
constexpr double kBudgetFreeCell = 120;
constexpr double kBudgetCritical = 300;
constexpr double kBudgetLog = 1800;

constexpr double kShort = 1e4;  // t_end of the power fits
constexpr double kLong = 1e6;   // window end for log exponents
constexpr double kTlo = 1e2;

const Exponent kInf = Exponent::infinity();
Exponent E(double x) { return std::isinf(x) ? kInf : Exponent::finite(x); }
ExponentQuadruple Q(double p, double q, double s, double th) { return ExponentQuadruple::make(E(p), E(q), E(s), E(th)); }

struct Line {
  int id;
  bool pass;
  std::string text;
};
std::vector<Line> lines;

void report(int id, bool pass, const std::string& text) {
  lines.push_back({id, pass, text});
  std::printf("[%2d] %s  %s\n", id, pass ? "PASS" : "FAIL", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every trace produced by the suite feeds criteria 6 and 7.
struct TraceAudit {
  double drift = 0;
  double l2 = 0;
  int traces = 0;
  void add(const EvolutionTrace& tr, const HarmonicProfile& U) {
    drift = std::max(drift, conserved_pairing(tr, U).max_drift);
    for (double v : tr.l2_scheme) l2 = std::max(l2, v / tr.l2_scheme.front());
    ++traces;
  }
} audit;

struct Lab {
  PotentialSpec V;
  HarmonicProfile U;
  std::vector<MemberRun> runs;
  double seconds = 0;
};

Lab run_lab(const PotentialSpec& V, const std::vector<ExponentQuadruple>& quads, double t_max) {
  const auto t0 = std::chrono::steady_clock::now();
  const double horizon = evolution_horizon(CurveSpec{kTlo, t_max, 16});
  FamilyOptions fo;
  fo.t_max = t_max;
  const GridPtr grid = RadialGrid::make(V.dimension(), GridSpacing{}, auto_r_max(horizon) + family_reach(fo));
  Lab lab{V, solve_harmonic(V, grid), {}, 0};
  TimeGridSpec ts;
  ts.t_end = horizon;
  for (const auto& m : default_families(V.dimension(), lab.U, fo)) {
    lab.runs.push_back(run_member(V, m, grid, ts, observables_for(quads)));
    audit.add(lab.runs.back().trace, lab.U);
  }
  lab.seconds = seconds_since(t0);
  return lab;
}

RateFit fit(const Lab& lab, const ExponentQuadruple& q, double t_hi) {
  return fit_rate(empirical_norm_curve(q, lab.runs, CurveSpec{kTlo, t_hi, 16}));
}

RadialFunction bump(int n, double R = 1.0) {
  auto grid = RadialGrid::make(n, GridSpacing{}, R);
  return RadialFunction::sample(grid, [R](double r) {
    const double s = 1 - r * r / (R * R);
    return s > 0 ? s * s : 0.0;
  });
}

// ---- 1, 2: power rates with δ = 0 ----

void power_cells(int id, const Lab& lab, const std::vector<std::pair<ExponentQuadruple, double>>& cells, double budget_total,
                 const char* budget_label) {
  bool ok = true;
  std::ostringstream os;
  for (const auto& [q, gamma] : cells) {
    const RateFit s = fit(lab, q, kShort);
    const RateFit l = fit(lab, q, kLong);
    const bool c = std::fabs(s.gamma - gamma) <= kTolGamma && l.delta_identified && std::fabs(l.delta) <= kTolDelta;
    ok &= c;
    os << fmt("%s g=%.3f(%.3f) d=%.3f(0); ", q.tag().c_str(), s.gamma, gamma, l.delta);
  }
  ok &= lab.seconds <= budget_total;
  os << fmt("runtime %.0fs for %zu cells (%s)", lab.seconds, cells.size(), budget_label);
  report(id, ok, os.str());
}

// ---- 5: L1 growth, 11: truncated boundedness ----

void l1_and_truncated(bool do_l1, bool do_trunc) {
  const int n = 3;
  const PotentialSpec V = ground_state_potential(n, 1.0);
  const LorentzExponents l1 = LorentzExponents::make(E(1), E(1)), l44 = LorentzExponents::make(E(4), E(4));
  const Observable trunc{l44, Region::Outer, 0.5};
  auto run = [&](double t_end) {
    const GridPtr grid = RadialGrid::make(n, GridSpacing{}, auto_r_max(t_end));
    const HarmonicProfile U = solve_harmonic(V, grid);
    TimeGridSpec ts;
    ts.t_end = t_end;
    auto tr = evolve(V, bump(n), grid, TimeGrid::make(0.0, ts), {{l1}, trunc});
    audit.add(tr, U);
    return tr;
  };
  const auto a = run(kShort);
  if (do_l1) {
    const RateFit f = l1_growth(a, kTlo);
    report(5, std::fabs(f.gamma - 0.5) <= kTolL1, fmt("L1 rate g=%.4f on [1e2,1e4], target 0.5 +- %.2f", f.gamma, kTolL1));
  }
  if (do_trunc) {
    const auto b = run(2 * kShort);
    const double sa = truncated_boundedness(a, l44, 0.5).sup, sb = truncated_boundedness(b, l44, 0.5).sup;
    const double change = std::fabs(sb - sa) / sa;
    report(11, change <= kTolTruncated,
           fmt("sup (4,4) cut 0.5: %.6g at 1e4, %.6g at 2e4, change %.4f <= %.2f", sa, sb, change, kTolTruncated));
  }
}

// Criterion 7 also covers a potential without a closed-form profile.
void tail_run() {
  const int n = 3;
  const PotentialSpec V = PotentialSpec::inverse_square_tail(n, 0.75, 1.0);
  const GridPtr grid = RadialGrid::make(n, GridSpacing{}, auto_r_max(1e3));
  TimeGridSpec ts;
  ts.t_end = 1e3;
  const auto tr = evolve(V, bump(n), grid, TimeGrid::make(0.0, ts), {{LorentzExponents::make(E(2), E(2))}});
  audit.add(tr, solve_harmonic(V, grid));
}

// ---- 8: Lorentz toolkit ----

void lorentz_toolkit() {
  double worst_ball = 0;
  int balls = 0;
  for (int n : {2, 3, 4, 5, 6})
    for (double R : {0.3, 1.0, 2.5, 7.0})
      for (double p : {1.0, 1.5, 2.0, 3.0, 6.0})
        for (double s : {1.0, 2.0, 3.5, double(INFINITY)}) {
          if (!LorentzExponents::valid(E(p), E(s))) continue;
          auto grid = RadialGrid::from_nodes(n, {0.0, R, 2 * R});
          const auto f = RadialFunction::indicator(grid, 0.0, R);
          // (c_N p/σ)^{1/σ} R^{N/p}
          const double expect = (std::isinf(s) ? 1.0 : std::pow(unit_ball_volume(n) * p / s, 1 / s)) * std::pow(R, n / p);
          const double got = lorentz_norm(f, LorentzExponents::make(E(p), E(s)));
          worst_ball = std::max(worst_ball, std::fabs(got - expect) / expect);
          ++balls;
        }

  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_lpp = 0;
  const int profiles = 100;
  for (int k = 0; k < profiles; ++k) {
    const int n = 2 + static_cast<int>(u(rng) * 5);
    const int cells = 3 + static_cast<int>(u(rng) * 30);
    std::vector<double> nodes{0.0};
    for (int i = 0; i < cells; ++i) nodes.push_back(nodes.back() + 0.05 + 2 * u(rng));
    std::vector<double> values(nodes.size());
    for (auto& v : values) v = u(rng) < 0.15 ? 0.0 : u(rng);
    values.back() = 0;
    const auto f = RadialFunction::from_nodal(RadialGrid::from_nodes(n, nodes), values);
    // Exponents are exact rationals, so draw p on a 1/8 lattice in [1, 8].
    const double p = 1 + std::floor(57 * u(rng)) / 8;
    const double a = lorentz_norm(f, LorentzExponents::make(E(p), E(p)));
    const double b = lp_norm(f, E(p));
    worst_lpp = std::max(worst_lpp, std::fabs(a - b) / b);
  }
  report(8, worst_ball <= kTolBall && worst_lpp <= kTolLpp,
         fmt("ball closed form: worst rel %.2e over %d (N,R,p,s) <= %.0e; L^{p,p}=L^p: worst rel %.2e over %d profiles <= %.0e",
             worst_ball, balls, kTolBall, worst_lpp, profiles, kTolLpp));
}

// ---- 9: duality sweep ----

std::vector<ExponentQuadruple> sweep(int n, const Rational& a) {
  std::vector<Exponent> ex{Exponent::finite(1.0), Exponent::finite(Rational(6, 5)), Exponent::finite(Rational(4, 3)),
                           Exponent::finite(2.0),  Exponent::finite(3.0),           Exponent::finite(6.0), kInf};
  if (a > Rational(0)) {
    const Rational al = Rational(n) / (Rational(n) - a), be = Rational(n) / a;
    ex.push_back(Exponent::finite(al));
    ex.push_back(Exponent::finite(be));
    ex.push_back(Exponent::finite((al + be) / Rational(2)));
    ex.push_back(Exponent::finite(al * Rational(2)));
  }
  const std::vector<Exponent> second{Exponent::finite(1.0), Exponent::finite(Rational(3, 2)), Exponent::finite(2.0),
                                     Exponent::finite(4.0), kInf};
  std::set<std::string> seen;
  std::vector<ExponentQuadruple> out;
  for (const auto& p : ex)
    for (const auto& q : ex)
      for (const auto& s : second)
        for (const auto& t : second)
          if (is_admissible(p, q, s, t)) {
            auto quad = ExponentQuadruple::make(p, q, s, t);
            if (seen.insert(quad.tag()).second) out.push_back(quad);
          }
  return out;
}

void duality() {
  bool ok = true;
  std::ostringstream os;
  const std::vector<std::pair<int, Rational>> cases{{3, Rational(1)}, {4, Rational(1)}, {3, Rational(-1)}, {3, Rational(0)}};
  for (const auto& [n, a] : cases) {
    const auto quads = sweep(n, a);
    int good = 0;
    for (const auto& q : quads) good += duality_identity(n, a.to_double(), q) ? 1 : 0;
    const bool c = static_cast<int>(quads.size()) >= kMinSweep && good == static_cast<int>(quads.size());
    ok &= c;
    os << fmt("(N=%d,A=%s) %d/%zu; ", n, a.str().c_str(), good, quads.size());
  }
  os << fmt("need >= %d each, all exact", kMinSweep);
  report(9, ok, os.str());
}

// ---- 10: harmonic round trip ----

void harmonic() {
  bool ok = true;
  double worst = 0;
  std::ostringstream os;
  const std::vector<std::pair<int, double>> cases{{3, 0.25}, {3, 0.75}, {3, 1.0}, {3, 1.25}, {4, 0.5}, {4, 1.5}};
  for (const auto& [n, A] : cases) {
    const GridPtr grid = RadialGrid::make(n, GridSpacing{}, 1e4);
    const HarmonicProfile U = solve_harmonic(ground_state_potential(n, A), grid);
    // The raw tail fit, not the snapped branch exponent.
    const double est = estimate_A(U.U).A;
    worst = std::max(worst, std::fabs(est - A));
    ok &= std::fabs(est - A) <= kTolHarmonic;
    os << fmt("N=%d A=%.2f -> %.5f; ", n, A, est);
  }
  os << fmt("worst %.2e <= %.2f", worst, kTolHarmonic);
  report(10, ok, os.str());
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expect_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) expect_fail.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--expect-fail 3,4]\n", argv[0]);
      return 2;
    }
  }

  try {
    lorentz_toolkit();
    duality();
    harmonic();

    {
      const std::vector<std::pair<ExponentQuadruple, double>> cells{
          {Q(1, INFINITY, 1, INFINITY), -1.5}, {Q(1, 2, 1, 2), -0.75}, {Q(2, INFINITY, 2, INFINITY), -0.75}};
      std::vector<ExponentQuadruple> quads;
      for (const auto& c : cells) quads.push_back(c.first);
      const Lab free = run_lab(PotentialSpec::zero(3), quads, kLong);
      power_cells(1, free, cells, kBudgetFreeCell * cells.size(), "budget 2 min per cell");
    }

    {
      const auto crit = Q(1, INFINITY, 1, INFINITY);
      const std::vector<ExponentQuadruple> log_cells{Q(1, 3, 1, 1), Q(1, 3, 1, 2), Q(1, 3, 1, INFINITY)};
      const std::vector<ExponentQuadruple> gap_cells{Q(1.5, 3, 1, 2), Q(1.5, 3, 3, 2)};
      std::vector<ExponentQuadruple> all{crit};
      all.insert(all.end(), log_cells.begin(), log_cells.end());
      all.insert(all.end(), gap_cells.begin(), gap_cells.end());
      const Lab gs = run_lab(ground_state_potential(3, 1.0), all, kLong);

      power_cells(2, gs, {{crit, -0.5}}, kBudgetCritical, "budget 5 min, shared run");

      bool ok3 = true;
      std::ostringstream os;
      const double want[] = {1.0, 0.5, 0.0};
      for (std::size_t i = 0; i < log_cells.size(); ++i) {
        const RateFit f = fit(gs, log_cells[i], kLong);
        ok3 &= f.delta_identified && std::fabs(f.delta - want[i]) <= kTolDelta && std::fabs(f.gamma + 0.5) <= kTolGamma;
        os << fmt("%s g=%.3f d=%.3f(%.1f); ", log_cells[i].tag().c_str(), f.gamma, f.delta, want[i]);
      }
      ok3 &= gs.seconds <= kBudgetLog;
      os << fmt("runtime %.0fs (budget 30 min)", gs.seconds);
      report(3, ok3, os.str());

      const RateFit f1 = fit(gs, gap_cells[0], kLong), f3 = fit(gs, gap_cells[1], kLong);
      // δ(σ=3) - δ(σ=1) = 1/σ' = 2/3
      const double gap = f3.delta - f1.delta;
      report(4, f1.delta_identified && f3.delta_identified && std::fabs(gap - 2.0 / 3.0) <= kTolGap,
             fmt("sigma=1 d=%.3f, sigma=3 d=%.3f, gap %.3f, target 0.667 +- %.1f", f1.delta, f3.delta, gap, kTolGap));
    }

    l1_and_truncated(true, true);
    tail_run();

    report(6, audit.drift <= kTolDrift, fmt("max pairing drift %.3e over %d runs <= %.0e", audit.drift, audit.traces, kTolDrift));
    report(7, audit.l2 <= 1 + kTolL2,
           fmt("max |u(t)|_2/|phi|_2 - 1 = %.3e over %d runs (zero, ground state, tail 0.75/(1+r^2)) <= %.0e", audit.l2 - 1, audit.traces, kTolL2));
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 1;
  }

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  std::set<int> failed;
  for (const auto& l : lines)
    if (!l.pass) failed.insert(l.id);
  std::printf("--\n%zu/%zu criteria pass\n", lines.size() - failed.size(), lines.size());
  if (expect_fail.empty()) return failed.empty() ? 0 : 1;
  if (failed == expect_fail) {
    std::printf("failures match the expected set (known-unattainable at this horizon)\n");
    return 0;
  }
  std::printf("failures differ from the expected set\n");
  return 1;
}
