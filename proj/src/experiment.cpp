#include "decaylab/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "decaylab/errors.hpp"
#include "decaylab/lorentz.hpp"
#include "json.hpp"

namespace decaylab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kReportVersion = 1;

// ---- YAML reading ----

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  require(node.IsMap(), where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InvalidArgument("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw InvalidArgument("bad value for " + where + "." + key);
  }
}

Exponent read_exponent(const YAML::Node& n) {
  require(n.IsScalar(), "exponent must be a scalar");
  return Exponent::parse(n.as<std::string>());
}

LorentzExponents read_pair(const YAML::Node& n) {
  require(n.IsSequence() && n.size() == 2, "Lorentz exponents are written [p, sigma]");
  const Exponent p = read_exponent(n[0]), s = read_exponent(n[1]);
  require(LorentzExponents::valid(p, s), "inadmissible Lorentz pair [" + p.str() + ", " + s.str() + "]");
  return LorentzExponents::make(p, s);
}

std::vector<double> read_list(const YAML::Node& node, const char* key, std::vector<double> fallback, const std::string& where) {
  if (!node[key]) return fallback;
  require(node[key].IsSequence(), where + "." + key + " must be a list");
  std::vector<double> out;
  for (const auto& v : node[key]) out.push_back(v.as<double>());
  return out;
}

// ---- YAML writing ----

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string yes(bool b) { return b ? "true" : "false"; }

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

std::string pair_text(const LorentzExponents& e) { return "[" + exponent_text(e.p) + ", " + exponent_text(e.sigma) + "]"; }

std::string quad_text(const ExponentQuadruple& q) {
  return "[" + exponent_text(q.p()) + ", " + exponent_text(q.q()) + ", " + exponent_text(q.sigma()) + ", " +
         exponent_text(q.theta()) + "]";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---- running ----

template <class F>
void parallel_for(std::size_t n, int threads, F&& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) job(i);
    });
}

TimeGridSpec time_spec(const ExperimentConfig& c, double t_end) {
  TimeGridSpec s;
  s.t_end = t_end;
  s.h0 = c.time.h0;
  s.ratio = c.time.ratio;
  s.startup_steps = c.time.startup_steps;
  return s;
}

std::string out_dir(const ExperimentConfig& config, const std::string& root, const std::string& command) {
  const fs::path dir = fs::path(root.empty() ? config.output : root) / config_hash(config) / command;
  fs::create_directories(dir);
  return dir.string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

json envelope(const ExperimentConfig& config, const std::string& command) {
  json j;
  j["version"] = kReportVersion;
  j["config_hash"] = config_hash(config);
  j["command"] = command;
  return j;
}

CommandResult finish(json report, const std::string& dir, int code) {
  CommandResult r;
  r.exit_code = code;
  r.directory = dir;
  r.report = report.dump(2) + "\n";
  write_text((fs::path(dir) / "report.json").string(), r.report);
  return r;
}

std::string g12(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  return s;
}

json quad_json(const ExponentQuadruple& q) {
  json j;
  j["p"] = exponent_text(q.p());
  j["q"] = exponent_text(q.q());
  j["sigma"] = exponent_text(q.sigma());
  j["theta"] = exponent_text(q.theta());
  return j;
}

double theory_A(const ExperimentConfig& config, const HarmonicProfile& U) {
  return config.potential.kind == PotentialKind::GroundState ? config.potential.A
         : config.potential.kind == PotentialKind::Zero      ? 0.0
                                                             : U.A;
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "config", {"dimension", "potential", "grid", "time", "datum", "evolve", "rates", "invariants", "output"});
  read(root, "dimension", c.dimension, "config");
  read(root, "output", c.output, "config");

  if (auto n = root["potential"]) {
    check_keys(n, "potential", {"kind", "A", "omega", "cutoff"});
    if (n["kind"]) c.potential.kind = parse_potential_kind(n["kind"].as<std::string>());
    read(n, "A", c.potential.A, "potential");
    read(n, "omega", c.potential.omega, "potential");
    read(n, "cutoff", c.potential.cutoff, "potential");
  }
  if (auto n = root["grid"]) {
    check_keys(n, "grid", {"inner_spacing", "inner_radius", "ratio", "r_max"});
    read(n, "inner_spacing", c.grid.spacing.inner_spacing, "grid");
    read(n, "inner_radius", c.grid.spacing.inner_radius, "grid");
    read(n, "ratio", c.grid.spacing.ratio, "grid");
    if (n["r_max"]) {
      if (n["r_max"].as<std::string>() == "auto")
        c.grid.r_max.reset();
      else
        c.grid.r_max = n["r_max"].as<double>();
    }
  }
  if (auto n = root["time"]) {
    check_keys(n, "time", {"t_end", "log_t_end", "h0", "ratio", "startup_steps"});
    read(n, "t_end", c.time.t_end, "time");
    read(n, "log_t_end", c.time.log_t_end, "time");
    read(n, "h0", c.time.h0, "time");
    read(n, "ratio", c.time.ratio, "time");
    read(n, "startup_steps", c.time.startup_steps, "time");
  }
  if (auto n = root["datum"]) {
    check_keys(n, "datum", {"kind", "radius"});
    read(n, "kind", c.datum.kind, "datum");
    read(n, "radius", c.datum.radius, "datum");
  }
  if (auto n = root["evolve"]) {
    check_keys(n, "evolve", {"observables"});
    if (n["observables"]) {
      require(n["observables"].IsSequence(), "evolve.observables must be a list");
      c.evolve.observables.clear();
      for (const auto& o : n["observables"]) c.evolve.observables.push_back(read_pair(o));
    }
  }
  if (auto n = root["rates"]) {
    check_keys(n, "rates", {"quadruples", "t_lo", "per_decade", "tol_gamma", "tol_delta", "verdict", "write_traces", "families"});
    if (auto q = n["quadruples"]) {
      if (q.IsScalar()) {
        require(q.as<std::string>() == "table2", "rates.quadruples must be 'table2' or a list");
        c.rates.table2 = true;
        c.rates.quadruples.clear();
      } else {
        require(q.IsSequence(), "rates.quadruples must be 'table2' or a list");
        c.rates.table2 = false;
        for (const auto& item : q) {
          require(item.IsSequence() && item.size() == 4, "a quadruple is written [p, q, sigma, theta]");
          c.rates.quadruples.push_back(ExponentQuadruple::make(read_exponent(item[0]), read_exponent(item[1]),
                                                               read_exponent(item[2]), read_exponent(item[3])));
        }
      }
    }
    read(n, "t_lo", c.rates.t_lo, "rates");
    read(n, "per_decade", c.rates.per_decade, "rates");
    read(n, "tol_gamma", c.rates.tol_gamma, "rates");
    read(n, "tol_delta", c.rates.tol_delta, "rates");
    read(n, "write_traces", c.rates.write_traces, "rates");
    if (n["verdict"]) {
      const auto v = n["verdict"].as<std::string>();
      require(v == "lower_bound" || v == "two_sided", "rates.verdict must be lower_bound or two_sided");
      c.rates.lower_bound = v == "lower_bound";
    }
    if (auto f = n["families"]) {
      check_keys(f, "rates.families", {"bump", "ball_radii", "profile_cap_radii", "wide_cap_reach", "power_caps", "power_cap_ratio"});
      auto& o = c.rates.families;
      read(f, "bump", o.bump, "rates.families");
      o.ball_radii = read_list(f, "ball_radii", o.ball_radii, "rates.families");
      o.profile_cap_radii = read_list(f, "profile_cap_radii", o.profile_cap_radii, "rates.families");
      read(f, "wide_cap_reach", o.wide_cap_reach, "rates.families");
      read(f, "power_caps", o.power_caps, "rates.families");
      read(f, "power_cap_ratio", o.power_cap_ratio, "rates.families");
    }
  }
  if (auto n = root["invariants"]) {
    check_keys(n, "invariants", {"truncated", "cutoff", "eps", "drift_tol", "l2_tol", "band", "l1_tol", "truncated_tol",
                                 "rayleigh_tol", "probe_radii"});
    auto& v = c.invariants;
    if (n["truncated"]) v.truncated = read_pair(n["truncated"]);
    read(n, "cutoff", v.cutoff, "invariants");
    read(n, "eps", v.eps, "invariants");
    read(n, "drift_tol", v.drift_tol, "invariants");
    read(n, "l2_tol", v.l2_tol, "invariants");
    read(n, "band", v.band, "invariants");
    read(n, "l1_tol", v.l1_tol, "invariants");
    read(n, "truncated_tol", v.truncated_tol, "invariants");
    read(n, "rayleigh_tol", v.rayleigh_tol, "invariants");
    v.probe_radii = read_list(n, "probe_radii", v.probe_radii, "invariants");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string serialize_body(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "dimension: " << c.dimension << "\n";
  o << "potential:\n  kind: " << to_string(c.potential.kind) << "\n  A: " << num(c.potential.A)
    << "\n  omega: " << num(c.potential.omega) << "\n  cutoff: " << num(c.potential.cutoff) << "\n";
  o << "grid:\n  inner_spacing: " << num(c.grid.spacing.inner_spacing) << "\n  inner_radius: " << num(c.grid.spacing.inner_radius)
    << "\n  ratio: " << num(c.grid.spacing.ratio) << "\n  r_max: " << (c.grid.r_max ? num(*c.grid.r_max) : "auto") << "\n";
  o << "time:\n  t_end: " << num(c.time.t_end) << "\n  log_t_end: " << num(c.time.log_t_end) << "\n  h0: " << num(c.time.h0)
    << "\n  ratio: " << num(c.time.ratio) << "\n  startup_steps: " << c.time.startup_steps << "\n";
  o << "datum:\n  kind: " << c.datum.kind << "\n  radius: " << num(c.datum.radius) << "\n";
  o << "evolve:\n  observables: [";
  for (std::size_t i = 0; i < c.evolve.observables.size(); ++i) o << (i ? ", " : "") << pair_text(c.evolve.observables[i]);
  o << "]\n";
  o << "rates:\n  quadruples: ";
  if (c.rates.table2) {
    o << "table2\n";
  } else {
    o << "[";
    for (std::size_t i = 0; i < c.rates.quadruples.size(); ++i) o << (i ? ", " : "") << quad_text(c.rates.quadruples[i]);
    o << "]\n";
  }
  const auto& f = c.rates.families;
  o << "  t_lo: " << num(c.rates.t_lo) << "\n  per_decade: " << c.rates.per_decade << "\n  tol_gamma: " << num(c.rates.tol_gamma)
    << "\n  tol_delta: " << num(c.rates.tol_delta) << "\n  verdict: " << (c.rates.lower_bound ? "lower_bound" : "two_sided")
    << "\n  write_traces: " << yes(c.rates.write_traces) << "\n  families:\n    bump: " << yes(f.bump)
    << "\n    ball_radii: " << list(f.ball_radii) << "\n    profile_cap_radii: " << list(f.profile_cap_radii)
    << "\n    wide_cap_reach: " << num(f.wide_cap_reach) << "\n    power_caps: " << yes(f.power_caps) << "\n    power_cap_ratio: " << num(f.power_cap_ratio) << "\n";
  const auto& v = c.invariants;
  o << "invariants:\n  truncated: " << pair_text(v.truncated) << "\n  cutoff: " << num(v.cutoff) << "\n  eps: " << num(v.eps)
    << "\n  drift_tol: " << num(v.drift_tol) << "\n  l2_tol: " << num(v.l2_tol) << "\n  band: " << num(v.band)
    << "\n  l1_tol: " << num(v.l1_tol) << "\n  truncated_tol: " << num(v.truncated_tol) << "\n  rayleigh_tol: " << num(v.rayleigh_tol)
    << "\n  probe_radii: " << list(v.probe_radii) << "\n";
  return o.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) { return serialize_body(c) + "output: " + c.output + "\n"; }

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_body(c))));
  return buf;
}

std::string exponent_text(const Exponent& e) {
  if (e.is_infinite()) return "inf";
  const Rational p = Rational(1) / e.reciprocal();
  return p.den() == 1 ? std::to_string(p.num()) : std::to_string(p.num()) + "/" + std::to_string(p.den());
}

PotentialSpec make_potential(const ExperimentConfig& c) {
  switch (c.potential.kind) {
    case PotentialKind::Zero: return PotentialSpec::zero(c.dimension);
    case PotentialKind::GroundState: return ground_state_potential(c.dimension, c.potential.A);
    case PotentialKind::InverseSquareTail: return PotentialSpec::inverse_square_tail(c.dimension, c.potential.omega, c.potential.cutoff);
  }
  throw InvalidArgument("unknown potential kind");
}

RadialFunction make_datum(const ExperimentConfig& c) {
  const double R = c.datum.radius;
  require(R > 0 && std::isfinite(R), "datum radius must be positive");
  if (c.datum.kind == "ball") return RadialFunction::sample(RadialGrid::from_nodes(c.dimension, {0.0, R}), [](double) { return 1.0; });
  if (c.datum.kind == "bump" || c.datum.kind == "gaussian") {
    const bool bump = c.datum.kind == "bump";
    const double r_end = bump ? R : 8.0 * R;
    std::vector<double> nodes(401);
    for (int i = 0; i <= 400; ++i) nodes[i] = r_end * i / 400.0;
    return RadialFunction::sample(RadialGrid::from_nodes(c.dimension, nodes), [R, bump](double r) {
      if (!bump) return std::exp(-r * r / (R * R));
      const double w = 1 - r * r / (R * R);
      return w > 0 ? w * w : 0.0;
    });
  }
  throw InvalidArgument("datum.kind must be bump, ball or gaussian");
}

GridPtr make_grid(const ExperimentConfig& c, double t_end, double reach) {
  const double need = auto_r_max(t_end) + reach;
  if (c.grid.r_max) {
    require(*c.grid.r_max >= need * (1 - 1e-12), "grid.r_max is below 12·sqrt(1 + t_end) plus the widest datum for this run");
    return RadialGrid::make(c.dimension, c.grid.spacing, *c.grid.r_max);
  }
  return RadialGrid::make(c.dimension, c.grid.spacing, need);
}

void validate(const ExperimentConfig& c) {
  require(c.dimension >= 2 && c.dimension <= 16, "dimension must lie in [2, 16]");
  make_potential(c);  // kind-specific rules, including the Hardy guard
  const auto& s = c.grid.spacing;
  require(s.inner_spacing > 0 && s.inner_radius > 0, "grid spacing and inner radius must be positive");
  require(s.ratio >= 1.0 && s.ratio <= 1.02, "grid.ratio must lie in [1, 1.02]");
  if (c.grid.r_max) require(*c.grid.r_max >= auto_r_max(c.time.t_end) * (1 - 1e-12), "grid.r_max is below 12·sqrt(1 + t_end)");
  require(c.time.t_end > 0 && std::isfinite(c.time.t_end), "time.t_end must be positive");
  require(c.time.log_t_end >= c.time.t_end, "time.log_t_end must be at least time.t_end");
  TimeGrid::make(0.0, time_spec(c, c.time.t_end));  // step rules
  make_datum(c);
  require(!c.evolve.observables.empty(), "evolve.observables is empty");
  require(c.rates.table2 || !c.rates.quadruples.empty(), "rates.quadruples is empty");
  require(c.rates.t_lo > 1.0 && c.rates.t_lo < c.time.t_end, "rates.t_lo must lie in (1, t_end)");
  require(c.rates.per_decade >= 2, "rates.per_decade must be at least 2");
  require(c.rates.tol_gamma > 0 && c.rates.tol_delta > 0, "rate tolerances must be positive");
  const auto& f = c.rates.families;
  for (double R : f.ball_radii) require(R > 0, "ball radii must be positive");
  for (double R : f.profile_cap_radii) require(R > 0, "profile cap radii must be positive");
  require(f.power_cap_ratio > 1.0, "power_cap_ratio must exceed 1");
  require(f.wide_cap_reach >= 0, "wide_cap_reach must be nonnegative");
  require(f.bump || !f.ball_radii.empty() || !f.profile_cap_radii.empty() || f.power_caps || f.wide_cap_reach > 0, "the family set is empty");
  if (c.potential.kind != PotentialKind::InverseSquareTail) {
    const double A = c.potential.kind == PotentialKind::GroundState ? c.potential.A : 0.0;
    const auto quads = c.rates.table2 ? table2_preset(c.dimension, A) : c.rates.quadruples;
    for (const auto& q : quads) theoretical_rate(c.dimension, A, q);
  }
  const auto& v = c.invariants;
  require(v.truncated.p.reciprocal() < Rational(1, 2), "invariants.truncated needs p > 2");
  require(v.cutoff > 0 && v.eps > 0 && v.band > 1, "invariant cutoffs must be positive and the band above 1");
  require(v.drift_tol > 0 && v.l2_tol > 0 && v.l1_tol > 0 && v.truncated_tol > 0 && v.rayleigh_tol >= 0,
          "invariant tolerances must be positive");
  require(!v.probe_radii.empty(), "invariants.probe_radii is empty");
  for (double R : v.probe_radii) require(R > 0, "probe radii must be positive");
}

std::vector<ExponentQuadruple> table2_preset(int n, double A) {
  require(n >= 2, "dimension must be at least 2");
  Rational a;
  if (A > 0) {
    try {
      a = Rational::from_double(A, 1'000'000, 1e-9);
    } catch (const InvalidArgument&) {
      throw InvalidArgument("the table2 preset needs a rational A");
    }
    require(a < Rational(n, 2), "the table2 preset needs A < N/2");
  } else {
    a = Rational(n, 3);
  }
  const Rational one(1), half(1, 2), zero(0);
  const Rational b = a / Rational(n);          // 1/β
  const Rational ia = one - b;                 // 1/α
  auto X = [](const Rational& r) { return Exponent::from_reciprocal(r); };
  auto make = [&](Rational P, Rational Q, Rational S, Rational T) {
    return ExponentQuadruple::make(X(P), X(Q), X(S), X(T));
  };
  const Rational q_low = (one + ia) / Rational(2);  // between 1 and α
  const Rational q_mid = (half + b) / Rational(2);  // between 2 and β
  const Rational s_alpha = ia / Rational(2);        // σ = 2α at p = α
  return {
      make(one, q_low, one, q_low),           // q < α
      make(one, ia, one, ia),                 // q = α
      make(ia, ia, s_alpha, s_alpha),
      make(one, half, one, half),             // α < q < β
      make(ia, half, s_alpha, half),
      make(half, q_mid, half, q_mid),
      make(one, b, one, half),                // q = β, θ = 2
      make(ia, b, s_alpha, half),
      make(half, b, half, half),
      make(b, b, one, half),
      make(one, zero, one, zero),             // q = ∞
      make(ia, zero, s_alpha, zero),
      make(half, zero, half, zero),
      make(b, zero, b, zero),
      make(b / Rational(2), zero, b / Rational(2), zero),
      make(one, one, one, one),               // anchors
      make(half, half, half, half),
  };
}

int thread_count() {
  if (const char* env = std::getenv("DECAYLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- commands

CommandResult cmd_harmonic(const ExperimentConfig& c, const std::string& root) {
  validate(c);
  const std::string dir = out_dir(c, root, "harmonic");
  json report = envelope(c, "harmonic");
  const PotentialSpec V = make_potential(c);
  const GridPtr grid = make_grid(c, c.time.t_end);
  json cell;
  cell["potential"] = V.describe();
  if (c.potential.kind == PotentialKind::GroundState) cell["A_prescribed"] = c.potential.A;
  const auto diag = diagnose_potential(V);
  cell["omega_estimate"] = diag.omega_estimate;
  cell["sup_r3_dV"] = diag.sup_r3_dV;
  cell["nodes"] = grid->size();
  cell["r_max"] = grid->r_max();
  int code = 0;
  try {
    const HarmonicProfile U = solve_harmonic(V, grid);
    const TailFit tail = estimate_A(U.U);
    cell["A"] = U.A;
    cell["A_tail_fit"] = tail.A;
    cell["fit_residual"] = tail.residual;
    cell["tail_window"] = {tail.window_lo, tail.window_hi};
    cell["criticality"] = to_string(U.criticality);
    cell["positive"] = true;
    std::ostringstream csv;
    csv << "r,U\n";
    for (double r : grid->nodes()) csv << g12(r) << "," << g12(U.U(r)) << "\n";
    write_text((fs::path(dir) / "harmonic_profile.csv").string(), csv.str());
  } catch (const NumericalFailure& e) {
    cell["positive"] = false;
    cell["error"] = e.what();
    code = 1;
  }
  report["cells"] = json::array({cell});
  return finish(report, dir, code);
}

CommandResult cmd_evolve(const ExperimentConfig& c, const std::string& root) {
  validate(c);
  const std::string dir = out_dir(c, root, "evolve");
  json report = envelope(c, "evolve");
  const PotentialSpec V = make_potential(c);
  const GridPtr grid = make_grid(c, c.time.t_end);
  std::vector<Observable> obs;
  for (const auto& e : c.evolve.observables) obs.push_back({e});
  const RadialFunction phi = make_datum(c);
  const EvolutionTrace tr = evolve(V, phi, grid, TimeGrid::make(0.0, time_spec(c, c.time.t_end)), obs);
  tr.write_csv((fs::path(dir) / "trace.csv").string());
  const HarmonicProfile U = solve_harmonic(V, grid);
  LorentzEvaluator eval(phi);
  json cells = json::array();
  for (std::size_t o = 0; o < obs.size(); ++o) {
    json cell;
    cell["observable"] = obs[o].tag();
    cell["datum_norm"] = eval.norm(obs[o].exps);
    cell["final_norm"] = tr.values[o].back();
    cells.push_back(cell);
  }
  report["cells"] = cells;
  json summary;
  summary["steps"] = tr.times.size() - 1;
  summary["t_end"] = tr.times.back();
  summary["leakage"] = tr.leakage;
  summary["pairing_drift"] = conserved_pairing(tr, U).max_drift;
  summary["min_value"] = *std::min_element(tr.min_value.begin(), tr.min_value.end());
  report["summary"] = summary;
  return finish(report, dir, 0);
}

CommandResult cmd_rates(const ExperimentConfig& c, const std::string& root, int threads) {
  validate(c);
  const std::string dir = out_dir(c, root, "rates");
  json report = envelope(c, "rates");
  const PotentialSpec V = make_potential(c);
  const int n = c.dimension;

  // Theory first: the longest cell fixes the evolution horizon. The tail kind
  // learns A from a provisional profile on the short grid.
  double A = c.potential.kind == PotentialKind::GroundState ? c.potential.A : 0.0;
  if (c.potential.kind == PotentialKind::InverseSquareTail) A = solve_harmonic(V, make_grid(c, c.time.t_end)).A;
  const auto quads = c.rates.table2 ? table2_preset(n, A) : c.rates.quadruples;

  struct Cell {
    ExponentQuadruple quad;
    std::optional<DecayRate> theory;
    double t_hi = 0;
    std::optional<NormCurve> curve;
    std::optional<RateFit> fit;
    std::string verdict;
    std::string two_sided;
    std::string error;
  };
  std::vector<Cell> cells;
  double t_max = c.time.t_end;
  for (const auto& q : quads) {
    Cell cell{q, {}, c.time.t_end, {}, {}, "error", "error", {}};
    try {
      cell.theory = theoretical_rate(n, A, q);
      if (cell.theory->delta != 0.0) cell.t_hi = c.time.log_t_end;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    t_max = std::max(t_max, cell.t_hi);
    cells.push_back(std::move(cell));
  }
  const CurveSpec longest{c.rates.t_lo, t_max, c.rates.per_decade};
  const double horizon = evolution_horizon(longest);
  FamilyOptions fo = c.rates.families;
  fo.t_max = t_max;
  const GridPtr grid = make_grid(c, horizon, family_reach(fo));
  const HarmonicProfile U = solve_harmonic(V, grid);
  const auto members = default_families(n, U, fo);
  const auto observables = observables_for(quads);

  std::vector<std::optional<MemberRun>> runs(members.size());
  std::vector<std::string> run_errors(members.size());
  parallel_for(members.size(), threads, [&](std::size_t i) {
    try {
      runs[i] = run_member(V, members[i], grid, time_spec(c, horizon), observables);
    } catch (const std::exception& e) {
      run_errors[i] = e.what();
    }
  });
  std::vector<MemberRun> good;
  json member_report = json::array();
  for (std::size_t i = 0; i < members.size(); ++i) {
    json m;
    m["member"] = members[i].family + ":" + members[i].label;
    if (runs[i]) {
      m["steps"] = runs[i]->trace.times.size() - 1;
      m["leakage"] = runs[i]->trace.leakage;
      m["pairing_drift"] = conserved_pairing(runs[i]->trace, U).max_drift;
      good.push_back(std::move(*runs[i]));
    } else {
      m["error"] = run_errors[i];
    }
    member_report.push_back(m);
  }

  parallel_for(cells.size(), threads, [&](std::size_t i) {
    Cell& cell = cells[i];
    if (!cell.theory) return;
    try {
      cell.curve = empirical_norm_curve(cell.quad, good, CurveSpec{c.rates.t_lo, cell.t_hi, c.rates.per_decade});
      cell.fit = fit_rate(*cell.curve);
      const Verdict v = c.rates.lower_bound ? lower_bound_verdict(*cell.fit, *cell.theory, c.rates.tol_gamma, c.rates.tol_delta)
                                            : verdict(*cell.fit, *cell.theory, c.rates.tol_gamma, c.rates.tol_delta);
      cell.verdict = to_string(v);
      cell.two_sided = to_string(verdict(*cell.fit, *cell.theory, c.rates.tol_gamma, c.rates.tol_delta));
    } catch (const std::exception& e) {
      cell.error = e.what();
      cell.verdict = "error";
    }
  });

  // Single writer from here on.
  json out_cells = json::array();
  std::ostringstream table, curves;
  table << "p,q,sigma,theta,gamma_theory,delta_theory,gamma_fit,delta_fit,residual,verdict\n";
  curves << "p,q,sigma,theta,t,estimate,member,anchor\n";
  int code = 0;
  for (const auto& cell : cells) {
    json j;
    j["quadruple"] = quad_json(cell.quad);
    j["tag"] = cell.quad.tag();
    j["t_end"] = cell.t_hi;
    const std::string qcols = exponent_text(cell.quad.p()) + "," + exponent_text(cell.quad.q()) + "," +
                              exponent_text(cell.quad.sigma()) + "," + exponent_text(cell.quad.theta());
    table << qcols;
    if (cell.theory) {
      j["theory"] = {{"gamma", cell.theory->gamma},
                     {"delta", cell.theory->delta},
                     {"gamma_exact", cell.theory->exact_gamma ? cell.theory->exact_gamma->str() : ""},
                     {"delta_exact", cell.theory->exact_delta ? cell.theory->exact_delta->str() : ""}};
      table << "," << g12(cell.theory->gamma) << "," << g12(cell.theory->delta);
    } else {
      table << ",nan,nan";
    }
    if (cell.fit) {
      const auto& f = *cell.fit;
      j["fit"] = {{"gamma", f.gamma},       {"delta", f.delta},
                  {"intercept", f.intercept}, {"residual", f.residual},
                  {"t_lo", f.t_lo},         {"t_hi", f.t_hi},
                  {"delta_identified", f.delta_identified}, {"ill_conditioned", f.ill_conditioned},
                  {"stage1_gamma", f.stage1_gamma}, {"stage2_delta", f.stage2_delta}};
      table << "," << g12(f.gamma) << "," << g12(f.delta) << "," << g12(f.residual);
      const auto& last = cell.curve->samples.back();
      j["extremal_member"] = {{"member", last.member}, {"anchor", last.anchor}};
      for (const auto& s : cell.curve->samples)
        curves << qcols << "," << g12(s.t) << "," << g12(s.estimate) << "," << s.member << "," << g12(s.anchor) << "\n";
    } else {
      table << ",nan,nan,nan";
    }
    table << "," << cell.verdict << "\n";
    j["verdict"] = cell.verdict;
    j["two_sided_verdict"] = cell.two_sided;
    if (!cell.error.empty()) j["error"] = cell.error;
    if (cell.verdict == "fail" || cell.verdict == "error") code = 1;
    out_cells.push_back(j);
  }
  report["A"] = A;
  report["members"] = member_report;
  report["cells"] = out_cells;
  write_text((fs::path(dir) / "table2_empirical.csv").string(), table.str());
  write_text((fs::path(dir) / "curves.csv").string(), curves.str());
  if (c.rates.write_traces) {
    const fs::path tdir = fs::path(dir) / "traces";
    fs::create_directories(tdir);
    for (const auto& r : good) r.trace.write_csv((tdir / (file_safe(r.family + "_" + r.label) + ".csv")).string());
  }
  return finish(report, dir, code);
}

RayleighGate rayleigh_gate(const ExperimentConfig& c, const std::function<double(double)>& V) {
  RayleighGate g;
  g.quotient = rayleigh_check(V, bump_probes(c.dimension, c.invariants.probe_radii));
  g.admissible = g.quotient >= -c.invariants.rayleigh_tol;
  return g;
}

CommandResult cmd_invariants(const ExperimentConfig& c, const std::string& root) {
  validate(c);
  const PotentialSpec V = make_potential(c);
  return run_invariants(c, root, [V](double r) { return V(r); });
}

CommandResult run_invariants(const ExperimentConfig& c, const std::string& root, const std::function<double(double)>& gate_potential) {
  validate(c);
  const std::string dir = out_dir(c, root, "invariants");
  json report = envelope(c, "invariants");
  json cells = json::array();
  auto add = [&](const std::string& name, double measured, const std::string& rule, bool pass) {
    cells.push_back({{"invariant", name}, {"measured", measured}, {"rule", rule}, {"pass", pass}});
    return pass;
  };
  auto add_error = [&](const std::string& name, const std::string& what) {
    cells.push_back({{"invariant", name}, {"pass", false}, {"error", what}});
  };

  const auto gate = rayleigh_gate(c, gate_potential);
  add("rayleigh_gate", gate.quotient, ">= -" + g12(c.invariants.rayleigh_tol), gate.admissible);
  if (!gate.admissible) {
    report["refused"] = true;
    report["cells"] = cells;
    return finish(report, dir, 1);
  }
  report["refused"] = false;

  const auto& iv = c.invariants;
  const PotentialSpec V = make_potential(c);
  const RadialFunction phi = make_datum(c);
  const double T = c.time.t_end;
  const LorentzExponents l1 = LorentzExponents::make(Exponent::finite(1.0), Exponent::finite(1.0));
  const LorentzExponents l2 = LorentzExponents::make(Exponent::finite(2.0), Exponent::finite(2.0));
  const Observable trunc{iv.truncated, Region::Outer, iv.cutoff};
  bool all = true;

  const GridPtr grid = make_grid(c, T);
  const HarmonicProfile U = solve_harmonic(V, grid);
  const EvolutionTrace tr = evolve(V, phi, grid, TimeGrid::make(0.0, time_spec(c, T)), {{l2}, {l1}, trunc});
  tr.write_csv((fs::path(dir) / "trace.csv").string());

  const auto drift = conserved_pairing(tr, U);
  all &= add("conservation_drift", drift.max_drift, "<= " + g12(iv.drift_tol), drift.max_drift <= iv.drift_tol);

  double l2_ratio = 0.0;
  for (double v : tr.l2_scheme) l2_ratio = std::max(l2_ratio, v / tr.l2_scheme.front());
  all &= add("l2_contraction", l2_ratio, "<= 1 + " + g12(iv.l2_tol), l2_ratio <= 1 + iv.l2_tol);

  const double min_u = *std::min_element(tr.min_value.begin(), tr.min_value.end());
  all &= add("positivity", min_u, ">= -" + g12(tr.options.positivity_tolerance), min_u >= -tr.options.positivity_tolerance);

  try {
    const auto ratios = interior_lower_ratio(tr, U, iv.eps);
    require(!ratios.empty(), "no snapshots at t >= 2");
    double lo = INFINITY, hi = 0;
    for (const auto& r : ratios) {
      lo = std::min(lo, r.min_ratio);
      hi = std::max(hi, r.min_ratio);
    }
    all &= add("interior_lower_band", hi / lo, "<= " + g12(iv.band) + " with min > 0", lo > 0 && hi / lo <= iv.band);
  } catch (const std::exception& e) {
    add_error("interior_lower_band", e.what());
    all = false;
  }

  try {
    const double A = theory_A(c, U);
    const double expected = theoretical_rate(c.dimension, A, ExponentQuadruple::make(l1.p, l1.p, l1.sigma, l1.sigma)).gamma;
    const RateFit f = l1_growth(tr, c.rates.t_lo);
    all &= add("l1_growth_gamma", f.gamma, "within " + g12(iv.l1_tol) + " of " + g12(expected), std::fabs(f.gamma - expected) <= iv.l1_tol);
  } catch (const std::exception& e) {
    add_error("l1_growth_gamma", e.what());
    all = false;
  }

  try {
    const double T2 = 2 * T;
    const GridPtr grid2 = make_grid(c, T2);
    const EvolutionTrace tr2 = evolve(V, phi, grid2, TimeGrid::make(0.0, time_spec(c, T2)), {trunc});
    const double a = truncated_boundedness(tr, iv.truncated, iv.cutoff).sup;
    const double b = truncated_boundedness(tr2, iv.truncated, iv.cutoff).sup;
    const double change = std::fabs(b - a) / a;
    all &= add("truncated_sup_change", change, "<= " + g12(iv.truncated_tol) + " when t_end doubles", change <= iv.truncated_tol);
    cells.back()["sup_t_end"] = a;
    cells.back()["sup_2t_end"] = b;
  } catch (const std::exception& e) {
    add_error("truncated_sup_change", e.what());
    all = false;
  }

  report["cells"] = cells;
  return finish(report, dir, all ? 0 : 1);
}

}  // namespace decaylab
