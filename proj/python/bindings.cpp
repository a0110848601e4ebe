#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dualgate/ballverifier.hpp"
#include "dualgate/bounds.hpp"
#include "dualgate/distpair.hpp"
#include "dualgate/errors.hpp"
#include "dualgate/report.hpp"
#include "dualgate/schedules.hpp"
#include "dualgate/specfun.hpp"
#include "dualgate/translip.hpp"
#include "dualgate/version.hpp"

namespace py = pybind11;
using namespace dualgate;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Risk-budget gate bounds, ball verifier and experiment runner";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DivergenceInfinite>(m, "DivergenceInfinite", PyExc_ArithmeticError);
  py::register_exception<MomentDiverged>(m, "MomentDiverged", PyExc_ArithmeticError);
  py::register_exception<BudgetExceedsHorizon>(m, "BudgetExceedsHorizon", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<NonpositiveMargin>(m, "NonpositiveMargin", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("normal_cdf", &std_normal_cdf);
  m.def("normal_quantile", &std_normal_quantile);
  m.def("chi_square_cdf", &chi_square_cdf, py::arg("dof"), py::arg("x"));

  py::class_<DistributionPair>(m, "DistributionPair")
      .def_static("unit_gaussian", &DistributionPair::unit_gaussian, py::arg("separation"))
      .def_static("laplace", &DistributionPair::laplace, py::arg("shift") = 1.0, py::arg("scale") = 1.0)
      .def_static("student_t", &DistributionPair::student_t, py::arg("shift") = 1.0, py::arg("dof") = 5.0)
      .def_static("symmetric_mixture", &DistributionPair::symmetric_mixture, py::arg("shift") = 1.0,
                  py::arg("spread") = 1.0, py::arg("sd") = 1.0)
      .def_property_readonly("name", &DistributionPair::name)
      .def("__repr__", [](const DistributionPair& p) { return "<DistributionPair " + p.name() + ">"; });

  m.def("renyi_divergence", [](const DistributionPair& p, double a) {
    return renyi_divergence(p, RenyiOrder(a));
  }, py::arg("pair"), py::arg("alpha"));
  m.def("np_tpr", &np_tpr, py::arg("pair"), py::arg("delta"));
  m.def("optimal_alpha", [](double ds) { return optimal_alpha(ds).alpha(); }, py::arg("delta_s"));
  m.def("holder_constant", [](const DistributionPair& p, double a) {
    return holder_constants(p, RenyiOrder(a)).c_alpha;
  }, py::arg("pair"), py::arg("alpha"));
  m.def("holder_per_step", [](const DistributionPair& p, double a, double d) {
    return holder_per_step(p, RenyiOrder(a), d);
  }, py::arg("pair"), py::arg("alpha"), py::arg("delta"));
  m.def("counting_bound", [](const DistributionPair& p, double c, double pw) {
    const BoundReport r = counting_bound(p, c, pw);
    return py::make_tuple(r.value, r.error_estimate);
  }, py::arg("pair"), py::arg("c"), py::arg("p"), "Returns (value, error_estimate).");
  m.def("direct_np_sum", [](const DistributionPair& p, double c, double pw, std::int64_t h) {
    const DirectSumInterval r = direct_np_sum(p, c, pw, h);
    return py::make_tuple(r.lower(), r.upper());
  }, py::arg("pair"), py::arg("c"), py::arg("p"), py::arg("horizon"));
  m.def("exact_ceiling", &exact_ceiling, py::arg("pair"), py::arg("horizon"), py::arg("budget"));
  m.def("holder_jensen_ceiling", [](const DistributionPair& p, std::int64_t n, double b, double a) {
    return holder_jensen_ceiling(p, n, b, RenyiOrder(a));
  }, py::arg("pair"), py::arg("horizon"), py::arg("budget"), py::arg("alpha"));
  m.def("ceiling_asymptotic", &ceiling_asymptotic, py::arg("delta_s"), py::arg("horizon"), py::arg("budget"));
  m.def("mi_finite_horizon", &mi_finite_horizon, py::arg("delta_sum"), py::arg("horizon"), py::arg("mi_budget"));

  m.def("starvation_delta_sum", [](int d_vc, double k, double n0, double c, double p, std::int64_t h) {
    const StarvationTrace t = starvation_simulation(d_vc, k, n0, c, p, h);
    return py::make_tuple(t.delta_sum, t.starved_steps);
  }, py::arg("d_vc"), py::arg("k"), py::arg("n0"), py::arg("c"), py::arg("p"), py::arg("horizon"));

  m.def("coverage_tpr", &coverage_tpr, py::arg("d"), py::arg("r"), py::arg("sigma"));
  m.def("sigma_star", &sigma_star, py::arg("d"), py::arg("r"), py::arg("target_tpr"));
  m.def("toy_certificate", [](int hidden_units, double safety_factor, std::uint64_t seed) {
    const ToyEnvironment env = ToyEnvironment::standard(hidden_units);
    const Vec theta0 = nominal_parameters(env, seed);
    LipschitzOptions opt;
    opt.safety_factor = safety_factor;
    opt.seed = seed;
    const BallCertificate c = make_certificate(env, theta0, estimate_lipschitz(env, theta0, opt),
                                               LipschitzProvenance::FiniteDifferenceEstimate, safety_factor);
    py::dict out;
    out["d"] = env.controller_dim();
    out["theta0"] = c.theta0;
    out["margin_m"] = c.margin_m;
    out["lipschitz_L"] = c.lipschitz_L;
    out["radius_r"] = c.radius_r;
    return out;
  }, py::arg("hidden_units") = 0, py::arg("safety_factor") = 5.0, py::arg("seed") = 0);

  m.def("reference_architectures", [] {
    std::vector<std::string> names;
    for (const auto& s : reference_architectures()) names.push_back(s.name);
    return names;
  });
  m.def("transformer_table", [](double margin, double first_row_steps) {
    const auto specs = reference_architectures();
    const double step = backsolve_step_norm(specs.front(), margin, first_row_steps);
    py::list rows;
    for (const auto& s : specs) {
      rows.append(py::make_tuple(s.name, per_layer_lipschitz(s, 0),
                                 allocate_budget(s, margin).per_layer_radius.front(),
                                 steps_in_ball(s, step, margin)));
    }
    return rows;
  }, py::arg("margin") = 0.3, py::arg("first_row_steps") = 11.6,
     "Rows of (name, L_k, r_k, steps_in_ball).");

  m.def("experiments", &experiment_names);
  m.def("run_experiment", [](const std::string& name, const std::string& config_json,
                             std::uint64_t seed, const std::string& out_dir) {
    const ExperimentConfig cfg = resolve_config(name, config_json, seed, out_dir);
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(cfg);
    }
    if (!out_dir.empty()) write_artifacts(cfg, r);
    return summary_json(cfg, r).dump();
  }, py::arg("name"), py::arg("config_json") = "{}", py::arg("seed") = 0, py::arg("out_dir") = "",
     "Runs an experiment and returns its summary as a JSON string; writes artifacts when out_dir is set.");
}
