#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "decaylab/errors.hpp"
#include "decaylab/experiment.hpp"
#include "decaylab/lorentz.hpp"
#include "decaylab/rates.hpp"
#include "decaylab/schrodinger.hpp"

namespace py = pybind11;
using namespace decaylab;

namespace {

Exponent to_exponent(const py::handle& h) {
  if (py::isinstance<py::str>(h)) return Exponent::parse(h.cast<std::string>());
  const double v = h.cast<double>();
  return std::isinf(v) ? Exponent::infinity() : Exponent::finite(v);
}

ExponentQuadruple to_quad(const py::sequence& s) {
  if (py::len(s) != 4) throw InvalidArgument("a quadruple is (p, q, sigma, theta)");
  return ExponentQuadruple::make(to_exponent(s[0]), to_exponent(s[1]), to_exponent(s[2]), to_exponent(s[3]));
}

py::tuple quad_tuple(const ExponentQuadruple& q) {
  return py::make_tuple(exponent_text(q.p()), exponent_text(q.q()), exponent_text(q.sigma()), exponent_text(q.theta()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "decaylab core: Lorentz norms, rate table, fitter and experiment commands";
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);

  m.def("theoretical_rate", [](int n, double A, const py::sequence& quad) {
    const DecayRate r = theoretical_rate(n, A, to_quad(quad));
    return py::make_tuple(r.gamma, r.delta);
  }, py::arg("dimension"), py::arg("A"), py::arg("quadruple"));
  m.def("theoretical_rate_exact", [](int n, double A, const py::sequence& quad) {
    const DecayRate r = theoretical_rate(n, A, to_quad(quad));
    if (!r.exact_gamma) throw InvalidArgument("A is not rational");
    return py::make_tuple(r.exact_gamma->str(), r.exact_delta->str());
  });
  m.def("duality_identity", [](int n, double A, const py::sequence& quad) { return duality_identity(n, A, to_quad(quad)); });
  m.def("dual", [](const py::sequence& quad) { return quad_tuple(to_quad(quad).dual()); });
  m.def("is_admissible", [](const py::handle& p, const py::handle& q, const py::handle& s, const py::handle& t) {
    return is_admissible(to_exponent(p), to_exponent(q), to_exponent(s), to_exponent(t));
  });
  m.def("alpha_beta", &alpha_beta, py::arg("dimension"), py::arg("A"));
  m.def("branch_exponent", [](int n, double omega, bool critical) {
    return branch_exponent(n, omega, critical ? Criticality::Critical : Criticality::Subcritical);
  }, py::arg("dimension"), py::arg("omega"), py::arg("critical") = false);

  m.def("lorentz_norm", [](int n, const std::vector<double>& nodes, const std::vector<double>& values,
                           const py::handle& p, const py::handle& sigma) {
    auto f = RadialFunction::from_nodal(RadialGrid::from_nodes(n, nodes), values);
    return lorentz_norm(f, LorentzExponents::make(to_exponent(p), to_exponent(sigma)));
  }, py::arg("dimension"), py::arg("nodes"), py::arg("values"), py::arg("p"), py::arg("sigma"));
  m.def("ball_norm", [](int n, double R, const py::handle& p, const py::handle& sigma) {
    auto f = RadialFunction::sample(RadialGrid::from_nodes(n, {0.0, R}), [](double) { return 1.0; });
    return lorentz_norm(f, LorentzExponents::make(to_exponent(p), to_exponent(sigma)));
  });

  m.def("fit_rate", [](const std::vector<double>& t, const std::vector<double>& v) {
    const RateFit f = fit_rate(t, v);
    py::dict d;
    d["gamma"] = f.gamma;
    d["delta"] = f.delta;
    d["intercept"] = f.intercept;
    d["residual"] = f.residual;
    d["delta_identified"] = f.delta_identified;
    d["ill_conditioned"] = f.ill_conditioned;
    return d;
  }, py::arg("t"), py::arg("values"));

  m.def("harmonic_exponent", [](int n, double A, double r_max) {
    auto grid = RadialGrid::make(n, GridSpacing{}, r_max);
    return solve_harmonic(ground_state_potential(n, A), grid).A;
  }, py::arg("dimension"), py::arg("A"), py::arg("r_max") = 2000.0);

  m.def("table2_preset", [](int n, double A) {
    py::list out;
    for (const auto& q : table2_preset(n, A)) out.append(quad_tuple(q));
    return out;
  });
  m.def("canonical_config", [](const std::string& text) { return serialize_config(parse_config(text)); });
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); });
  m.def("validate_config", [](const std::string& text) { validate(parse_config(text)); });

  auto command = [](CommandResult (*fn)(const ExperimentConfig&, const std::string&)) {
    return [fn](const std::string& text, const std::string& out) {
      CommandResult r;
      {
        py::gil_scoped_release release;
        r = fn(parse_config(text), out);
      }
      return py::make_tuple(r.exit_code, r.directory, r.report);
    };
  };
  m.def("cmd_harmonic", command(&cmd_harmonic), py::arg("config"), py::arg("out"));
  m.def("cmd_evolve", command(&cmd_evolve), py::arg("config"), py::arg("out"));
  m.def("cmd_invariants", command(&cmd_invariants), py::arg("config"), py::arg("out"));
  m.def("cmd_rates", [](const std::string& text, const std::string& out) {
    CommandResult r;
    {
      py::gil_scoped_release release;
      r = cmd_rates(parse_config(text), out);
    }
    return py::make_tuple(r.exit_code, r.directory, r.report);
  }, py::arg("config"), py::arg("out"));
}
