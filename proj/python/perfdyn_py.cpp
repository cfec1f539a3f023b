#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "perfdyn/chaos.hpp"
#include "perfdyn/dynamics.hpp"
#include "perfdyn/equilibrium.hpp"
#include "perfdyn/io.hpp"
#include "perfdyn/stochastic.hpp"

namespace py = pybind11;
using namespace perfdyn;

namespace {

// Profiles cross the boundary as n x d arrays; rates as a scalar or length-n array.
ModelProfile profile_of(const Matrix& rows) { return ModelProfile(rows); }

LearningRates rates_of(const py::object& eta, int n) {
  if (py::isinstance<py::float_>(eta) || py::isinstance<py::int_>(eta))
    return LearningRates::uniform(n, eta.cast<double>());
  return LearningRates(eta.cast<Vector>());
}

py::dict trajectory_dict(const Trajectory& t) {
  const std::size_t k = t.size();
  std::vector<double> phi(k), xi_l1(k), loss(k);
  for (std::size_t j = 0; j < k; ++j) {
    phi[j] = t.diagnostics[j].potential;
    xi_l1[j] = t.diagnostics[j].xi_l1;
    loss[j] = t.diagnostics[j].total_loss;
  }
  std::vector<Matrix> states;
  states.reserve(t.states.size());
  for (const ModelProfile& s : t.states) states.push_back(s.matrix());
  py::dict out;
  out["times"] = t.times;
  out["states"] = states;
  out["potential"] = phi;
  out["xi_l1"] = xi_l1;
  out["total_loss"] = loss;
  out["final"] = t.last().matrix();
  out["states_truncated"] = t.states_truncated;
  return out;
}

py::dict certificate_dict(const Period3Outcome& outcome) {
  py::dict out;
  if (const auto* c = std::get_if<Period3Certificate>(&outcome)) {
    out["certified"] = true;
    out["x"] = std::vector<double>{c->x0, c->x1, c->x2, c->x3};
    out["margin_x0_x3"] = c->margin_x0_x3;
    out["margin_x1_x0"] = c->margin_x1_x0;
    out["residual"] = c->residual;
  } else {
    out["certified"] = false;
    out["reason"] = std::get<Period3Failure>(outcome).reason;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_perfdyn, m) {
  m.doc() = "Exponentiated-gradient dynamics under performative prediction";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<MarketSpec>(m, "MarketSpec")
      .def(py::init<Vector, Vector, Matrix, Vector, double>(), py::arg("lam"), py::arg("theta0"),
           py::arg("A"), py::arg("c"), py::arg("sigma0_sq") = 1.0)
      .def_property_readonly("d", &MarketSpec::d)
      .def_property_readonly("n", &MarketSpec::n)
      .def_property_readonly("lam", &MarketSpec::lambda)
      .def_property_readonly("theta0", &MarketSpec::theta0)
      .def_property_readonly("A", &MarketSpec::A)
      .def_property_readonly("b", &MarketSpec::b)
      .def_property_readonly("c", &MarketSpec::c)
      .def_property_readonly("sigma0_sq", &MarketSpec::sigma0_sq)
      .def("with_lambda", &MarketSpec::with_lambda)
      .def("to_json", [](const MarketSpec& s) { return market_to_json(s).dump(); })
      .def_static("from_json", [](const std::string& text) { return market_from_json(Json::parse(text)); })
      .def_static("load", &load_market)
      .def("__eq__", &MarketSpec::operator==);

  m.def("gradient", [](const MarketSpec& s, const Matrix& deployed, const Vector& predictive) {
    return gradient(s, profile_of(deployed), SimplexPoint(predictive));
  });
  m.def("grad_profile", [](const MarketSpec& s, const Matrix& p) { return grad_profile(s, profile_of(p)).grads; });
  m.def("xi", [](const MarketSpec& s, const Matrix& p) { return xi(s, profile_of(p)); });
  m.def("decoupled_loss", [](const MarketSpec& s, const Matrix& deployed, const Vector& predictive) {
    return decoupled_loss(s, profile_of(deployed), SimplexPoint(predictive));
  });
  m.def("potential", [](const MarketSpec& s, const Matrix& p) { return potential(s, profile_of(p)); });
  m.def("potential_gradient", [](const MarketSpec& s, const Matrix& p) { return potential_gradient(s, profile_of(p)); });

  m.def(
      "find_stable_point",
      [](const MarketSpec& s, double tol, long max_iters) {
        const StablePointResult r = find_stable_point(s, tol, max_iters);
        py::dict out;
        out["theta_star"] = r.theta_star.matrix();
        out["kkt_residual"] = r.kkt_residual;
        out["proper"] = r.proper;
        out["potential"] = r.potential_value;
        out["iterations"] = r.iterations;
        out["supports"] = r.supports;
        return out;
      },
      py::arg("spec"), py::arg("tol") = 1e-10, py::arg("max_iters") = 2'000'000);
  m.def("check_stable", [](const MarketSpec& s, const Matrix& p, double tol) {
    return check_stable(s, profile_of(p), tol).stable;
  });
  m.def("check_optimal", [](const MarketSpec& s, const Matrix& p, double tol) {
    return check_optimal(s, profile_of(p), tol);
  });
  m.def(
      "safe_learning_rate",
      [](const MarketSpec& s, const Matrix& theta_star, double R_eta) {
        const SafeRateReport r = safe_learning_rate(s, profile_of(theta_star), R_eta);
        py::dict out;
        out["C1"] = r.C1;
        out["C2"] = r.C2;
        out["C3"] = r.C3;
        out["C4"] = r.C4;
        out["max_abs_gradient"] = r.max_abs_gradient;
        out["eta_bound_gradient"] = r.eta_bound_gradient;
        out["eta_bound_xi"] = r.eta_bound_xi;
        out["eta_bound_descent"] = r.eta_bound_descent;
        out["eta_star"] = r.eta_star;
        return out;
      },
      py::arg("spec"), py::arg("theta_star"), py::arg("R_eta") = 1.0);

  m.def("eg_step", [](const MarketSpec& s, const Matrix& p, const py::object& eta) {
    return eg_step(s, profile_of(p), rates_of(eta, s.n())).matrix();
  });
  m.def("simulate", [](const MarketSpec& s, const Matrix& initial, const py::object& eta, long T) {
    return trajectory_dict(simulate(s, profile_of(initial), rates_of(eta, s.n()), T));
  });
  m.def(
      "integrate_ode",
      [](const MarketSpec& s, const Matrix& initial, const py::object& eta, double t_end, double dt,
         long record_every) {
        OdeOptions opts;
        opts.record_every = record_every;
        return trajectory_dict(integrate_ode(s, profile_of(initial), rates_of(eta, s.n()), t_end, dt, opts));
      },
      py::arg("spec"), py::arg("initial"), py::arg("eta"), py::arg("t_end"), py::arg("dt"),
      py::arg("record_every") = 1);
  m.def(
      "stochastic_simulate",
      [](const MarketSpec& s, const Matrix& initial, const py::object& eta, long T, long m_samples,
         std::uint64_t seed, bool shared) {
        StochasticOptions opts;
        opts.shared_batch = shared;
        return trajectory_dict(
            stochastic_simulate(s, profile_of(initial), rates_of(eta, s.n()), T, m_samples, seed, opts));
      },
      py::arg("spec"), py::arg("initial"), py::arg("eta"), py::arg("T"), py::arg("m"), py::arg("seed"),
      py::arg("shared_batch") = false);

  m.def("alpha_beta", [](const MarketSpec& s, double eta, double L) {
    const ReducedMapParams p = alpha_beta(s, eta, L);
    return py::make_tuple(p.u, p.v);
  });
  m.def("reduced_map", [](double u, double v, double x) { return reduced_map(ReducedMapParams{u, v, {}}, x); });
  m.def("period3_certificate",
        [](double u, double v) { return certificate_dict(period3_certificate(ReducedMapParams{u, v, {}})); });
  m.def(
      "carrying_capacity",
      [](const MarketSpec& s, double eta, double L_min, double L_max, double tol) {
        const CarryingCapacity c = carrying_capacity(s, eta, L_min, L_max, tol);
        py::dict out;
        out["L_star"] = c.L_star;
        out["permuted"] = c.permuted;
        out["monotone_above"] = c.monotone_above;
        return out;
      },
      py::arg("spec"), py::arg("eta"), py::arg("L_min"), py::arg("L_max"), py::arg("tol") = 1e-6);
  m.def(
      "lyapunov_exponent",
      [](double u, double v, double x0, long burn_in, long iters) {
        return lyapunov_exponent(ReducedMapParams{u, v, {}}, x0, burn_in, iters);
      },
      py::arg("u"), py::arg("v"), py::arg("x0"), py::arg("burn_in") = 1000, py::arg("iters") = 10000);
}
