#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "decaylab/errors.hpp"
#include "decaylab/experiment.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace decaylab;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("decaylab_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmallRates = R"(
dimension: 3
potential: {kind: ground_state, A: 1}
time: {t_end: 1000, log_t_end: 1e4}
rates:
  quadruples: [[1, inf, 1, inf], [1, 3, 1, 2], [2, 2, 2, 2]]
  families: {bump: true, ball_radii: [1], profile_cap_radii: [], wide_cap_reach: 0, power_caps: false}
)";

}  // namespace

TEST_CASE("config defaults and round trip") {
  const ExperimentConfig d = parse_config("");
  CHECK(d.dimension == 3);
  CHECK(d.rates.table2);
  CHECK_NOTHROW(validate(d));
  const std::string text = R"(
dimension: 4
potential: {kind: ground_state, A: 1.5}
grid: {inner_spacing: 0.01, r_max: 5000}
time: {t_end: 2e4, h0: 5e-5}
evolve: {observables: [[4/3, 2], [inf, inf]]}
rates:
  quadruples: [[4/3, 4, 3, 2], [1, inf, 1, inf]]
  verdict: two_sided
  families: {ball_radii: [2, 8], power_cap_ratio: 1.5}
invariants: {truncated: [6, 3], band: 4}
output: elsewhere
)";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.dimension == 4);
  CHECK(c.grid.r_max.value() == 5000);
  CHECK(c.evolve.observables[0].p.reciprocal() == Rational(3, 4));
  CHECK_FALSE(c.rates.table2);
  CHECK_FALSE(c.rates.lower_bound);
  CHECK(c.rates.quadruples.size() == 2);
  CHECK(c.rates.quadruples[0].p().reciprocal() == Rational(3, 4));
  CHECK(c.rates.families.ball_radii == std::vector<double>{2, 8});
  const std::string once = serialize_config(c);
  const ExperimentConfig again = parse_config(once);
  CHECK(serialize_config(again) == once);
  CHECK(config_hash(again) == config_hash(c));
  CHECK(again.rates.quadruples == c.rates.quadruples);
  CHECK(again.time.h0 == c.time.h0);
  CHECK(serialize_config(parse_config(serialize_config(d))) == serialize_config(d));
}

TEST_CASE("config hash ignores the output directory only") {
  ExperimentConfig a = parse_config("");
  ExperimentConfig b = a;
  b.output = "somewhere/else";
  CHECK(config_hash(a) == config_hash(b));
  b.time.t_end = 2e4;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config("rates: {quadruples: []}"));
  CHECK_THROWS_AS(validate(parse_config("rates: {quadruples: []}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("potential: {kind: ground_state, A: 0.5}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("potential: {kind: ground_state, A: 1.5}")), InvalidArgument);
  CHECK_THROWS_AS(parse_config("potential: {kind: magnetic}"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("bogus: 1"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("time: {t_end: 1e4, dt: 2}"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("rates: {quadruples: [[2, 1, 2, 1]]}"), InvalidArgument);  // p > q
  CHECK_THROWS_AS(parse_config("rates: {quadruples: [[1, 2, 2, 2]]}"), InvalidArgument);  // p = 1 needs σ = 1
  CHECK_THROWS_AS(parse_config("rates: {quadruples: not_a_preset}"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("dimension: [3"), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("grid: {r_max: 100}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("time: {ratio: 1.2}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("invariants: {truncated: [2, 2]}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("datum: {kind: square}")), InvalidArgument);
  CHECK_THROWS_AS(validate(parse_config("potential: {kind: inverse_square_tail, omega: -0.3}")), InvalidArgument);
  CHECK_NOTHROW(validate(parse_config("potential: {kind: inverse_square_tail, omega: -0.2, cutoff: 2}")));
  CHECK_NOTHROW(validate(parse_config("potential: {kind: zero}")));
}

TEST_CASE("table2 preset covers every regime once") {
  const auto cells = table2_preset(3, 1.0);
  CHECK(cells.size() == 17);
  std::set<std::string> tags;
  for (const auto& q : cells) tags.insert(q.tag());
  CHECK(tags.size() == 17);
  const Exponent alpha = Exponent::finite(1.5), beta = Exponent::finite(3.0);
  auto regime = [&](const Exponent& e) { return e < alpha ? 0 : e == alpha ? 1 : e < beta ? 2 : e == beta ? 3 : 4; };
  std::set<std::pair<int, int>> seen;
  for (const auto& q : cells) {
    CHECK(is_admissible(q.p(), q.q(), q.sigma(), q.theta()));
    seen.insert({regime(q.p()), regime(q.q())});
  }
  // Lower-triangular 5 x 5 grid of (p, q) regimes.
  CHECK(seen.size() == 15);
  CHECK(tags.count("(1.5,3,3,2)"));
  CHECK(tags.count("(3,3,1,2)"));
  CHECK(tags.count("(1,inf,1,inf)"));
  // N = 4, A = 1: thresholds 4/3 and 4.
  const auto four = table2_preset(4, 1.0);
  CHECK(four[2].p().reciprocal() == Rational(3, 4));
  CHECK(four[6].q().reciprocal() == Rational(1, 4));
  CHECK(table2_preset(3, 0.0).size() == 17);
  CHECK(exponent_text(Exponent::finite(Rational(4, 3))) == "4/3");
  CHECK(exponent_text(Exponent::infinity()) == "inf");
}

TEST_CASE("harmonic command") {
  const auto out = scratch("harmonic");
  auto r = cmd_harmonic(parse_config(""), out.string());
  CHECK(r.exit_code == 0);
  auto j = json::parse(r.report);
  CHECK(j["version"] == 1);
  CHECK(j["cells"][0]["A"].get<double>() == doctest::Approx(1.0).epsilon(0.01).scale(0));
  CHECK(std::fabs(j["cells"][0]["A_tail_fit"].get<double>() - 1.0) <= 0.01);
  CHECK(j["cells"][0]["criticality"] == "critical");
  CHECK(fs::exists(fs::path(r.directory) / "harmonic_profile.csv"));
  CHECK(fs::path(r.directory).parent_path().filename() == config_hash(parse_config("")));

  auto z = json::parse(cmd_harmonic(parse_config("potential: {kind: zero}"), out.string()).report);
  CHECK(z["cells"][0]["A"].get<double>() == 0.0);
  CHECK_THROWS_AS(cmd_harmonic(parse_config("potential: {kind: ground_state, A: 0.5}"), out.string()), InvalidArgument);
  fs::remove_all(out);
}

TEST_CASE("evolve command writes a trace") {
  const auto out = scratch("evolve");
  auto r = cmd_evolve(parse_config("time: {t_end: 200}"), out.string());
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(fs::path(r.directory) / "trace.csv");
  CHECK(csv.rfind("# {", 0) == 0);
  CHECK(csv.find("\nt,norm_tag,value\n") != std::string::npos);
  CHECK(csv.find(",L(inf,inf),") != std::string::npos);
  auto j = json::parse(r.report);
  CHECK(j["summary"]["pairing_drift"].get<double>() <= 1e-3);
  CHECK(j["cells"].size() == 3);
  fs::remove_all(out);
}

TEST_CASE("rates command: shared traces, per-cell errors, determinism") {
  const auto out = scratch("rates");
  // t_end = 2 t_lo with two samples per decade leaves too few points for the
  // short cells; the log cell runs to 10^4 and must still be reported.
  std::string text = std::string(kSmallRates) + "  t_lo: 500\n  per_decade: 2\n";
  auto c = parse_config(text);
  auto r = cmd_rates(c, out.string(), 2);
  auto j = json::parse(r.report);
  REQUIRE(j["cells"].size() == 3);
  CHECK(j["cells"][0]["verdict"] == "error");
  CHECK(j["cells"][0].contains("error"));
  CHECK(j["cells"][1]["verdict"] != "error");
  CHECK(j["cells"][1]["t_end"].get<double>() == 1e4);
  CHECK(r.exit_code == 1);

  c = parse_config(kSmallRates);
  auto a = cmd_rates(c, out.string(), 1);
  const std::string table_a = slurp(fs::path(a.directory) / "table2_empirical.csv");
  const std::string trace_a = slurp(fs::path(a.directory) / "traces" / "bump_R_1.csv");
  auto b = cmd_rates(c, out.string(), 3);
  CHECK(b.report == a.report);
  CHECK(slurp(fs::path(b.directory) / "table2_empirical.csv") == table_a);
  CHECK(slurp(fs::path(b.directory) / "traces" / "bump_R_1.csv") == trace_a);
  CHECK(table_a.rfind("p,q,sigma,theta,gamma_theory,delta_theory,gamma_fit,delta_fit,residual,verdict\n", 0) == 0);
  auto ja = json::parse(a.report);
  CHECK(ja["members"].size() == 2);
  for (const auto& cell : ja["cells"]) CHECK(cell["verdict"] != "error");
  CHECK(ja["cells"][0]["theory"]["gamma_exact"] == "-1/2");
  CHECK(ja["cells"][1]["theory"]["delta_exact"] == "1/2");
  fs::remove_all(out);
}

TEST_CASE("rates command on the free preset matches the A = 0 table") {
  const auto out = scratch("rates_free");
  auto c = parse_config(R"(
potential: {kind: zero}
time: {t_end: 1e4}
rates:
  quadruples: [[1, inf, 1, inf], [1, 2, 1, 2], [2, inf, 2, inf], [2, 2, 2, 2]]
  families: {profile_cap_radii: [], power_caps: false}
  write_traces: false
)");
  auto j = json::parse(cmd_rates(c, out.string(), 1).report);
  for (const auto& cell : j["cells"]) {
    CAPTURE(cell["tag"].get<std::string>());
    CHECK(cell["verdict"] == "pass");
    CHECK(cell["theory"]["delta"].get<double>() == 0.0);
  }
  fs::remove_all(out);
}

TEST_CASE("invariants command") {
  const auto out = scratch("invariants");
  auto r = cmd_invariants(parse_config(""), out.string());
  auto j = json::parse(r.report);
  CHECK_FALSE(j["refused"].get<bool>());
  std::map<std::string, json> by_name;
  for (const auto& cell : j["cells"]) by_name[cell["invariant"]] = cell;
  CHECK(by_name["conservation_drift"]["measured"].get<double>() <= 1e-3);
  for (const auto& [name, cell] : by_name) {
    CAPTURE(name);
    CHECK(cell["pass"].get<bool>());
  }
  CHECK(r.exit_code == 0);

  auto free = json::parse(cmd_invariants(parse_config("potential: {kind: zero}\ntime: {t_end: 1000}"), out.string()).report);
  for (const auto& cell : free["cells"])
    if (cell["invariant"] == "l2_contraction") CHECK(cell["measured"].get<double>() <= 1 + 1e-10);

  // An inadmissible potential is refused before any evolution.
  const auto fresh = scratch("invariants_refused");
  auto bad = run_invariants(parse_config(""), fresh.string(), [](double r) { return -10.0 / (1.0 + r * r); });
  auto jb = json::parse(bad.report);
  CHECK(bad.exit_code == 1);
  CHECK(jb["refused"].get<bool>());
  CHECK(jb["cells"].size() == 1);
  CHECK(jb["cells"][0]["measured"].get<double>() < 0.0);
  CHECK_FALSE(fs::exists(fs::path(bad.directory) / "trace.csv"));
  fs::remove_all(out);
  fs::remove_all(fresh);
}

TEST_CASE("thread count from the environment") {
  setenv("DECAYLAB_THREADS", "3", 1);
  CHECK(thread_count() == 3);
  setenv("DECAYLAB_THREADS", "junk", 1);
  CHECK(thread_count() >= 1);
  unsetenv("DECAYLAB_THREADS");
}
