#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "doseband/bootstrap.hpp"
#include "doseband/bounds.hpp"
#include "doseband/commands.hpp"
#include "doseband/error.hpp"
#include "doseband/quadrature.hpp"
#include "doseband/synthetic.hpp"

namespace py = pybind11;
using namespace doseband;

namespace {

BoundSpec make_spec(const std::string& optimizer, const std::string& estimator,
                    std::size_t mc_samples, int gh_order, std::uint64_t seed) {
  BoundSpec s;
  s.optimizer = bound_optimizer_from_string(optimizer);
  s.estimator = estimator_from_string(estimator);
  s.mc_samples = mc_samples;
  s.gh_order = gh_order;
  s.seed = seed;
  return s;
}

py::dict bound_dict(const SensitivityBound& b) {
  py::dict d;
  d["lower"] = b.lower;
  d["upper"] = b.upper;
  d["mu_tilde"] = b.mu_tilde;
  d["lambda"] = b.lambda;
  return d;
}

py::dict ci_dict(const ConfidenceBound& c) {
  py::dict d;
  d["lower"] = c.lower;
  d["upper"] = c.upper;
  d["alpha"] = c.alpha;
  d["lambda"] = c.lambda;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of doseband";

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  auto numeric_error =
      py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  (void)input_error;
  (void)numeric_error;

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init([](std::size_t n, double gamma_t, double gamma_y, double noise_var, int bb_n,
                       std::uint64_t seed) {
             SyntheticConfig c;
             c.n = n;
             c.gamma_t = gamma_t;
             c.gamma_y = gamma_y;
             c.noise_var = noise_var;
             c.bb_n = bb_n;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("n") = 1000, py::arg("gamma_t") = 0.3, py::arg("gamma_y") = 0.5,
           py::arg("noise_var") = 0.04, py::arg("bb_n") = 100, py::arg("seed") = 1331)
      .def_readwrite("n", &SyntheticConfig::n)
      .def_readwrite("gamma_t", &SyntheticConfig::gamma_t)
      .def_readwrite("gamma_y", &SyntheticConfig::gamma_y)
      .def_readwrite("noise_var", &SyntheticConfig::noise_var)
      .def_readwrite("bb_n", &SyntheticConfig::bb_n)
      .def_readwrite("seed", &SyntheticConfig::seed);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("dim", &Dataset::dim)
      .def_readwrite("x", &Dataset::x)
      .def_readwrite("t", &Dataset::t)
      .def_readwrite("y", &Dataset::y)
      .def_readwrite("u", &Dataset::u)
      .def("__len__", &Dataset::size)
      .def("validate", &Dataset::validate);

  py::class_<DensityModelConfig>(m, "DensityModelConfig")
      .def(py::init<>())
      .def_readwrite("hidden_units", &DensityModelConfig::hidden_units)
      .def_readwrite("depth", &DensityModelConfig::depth)
      .def_readwrite("n_components", &DensityModelConfig::n_components)
      .def_readwrite("negative_slope", &DensityModelConfig::negative_slope)
      .def_readwrite("learning_rate", &DensityModelConfig::learning_rate)
      .def_readwrite("batch_size", &DensityModelConfig::batch_size)
      .def_readwrite("epochs", &DensityModelConfig::epochs)
      .def_readwrite("sigma_floor", &DensityModelConfig::sigma_floor)
      .def_readwrite("seed", &DensityModelConfig::seed)
      .def_property(
          "optimizer",
          [](const DensityModelConfig& c) { return c.optimizer == Optimizer::kAdam ? "adam" : "sgd"; },
          [](DensityModelConfig& c, const std::string& v) {
            if (v == "adam") c.optimizer = Optimizer::kAdam;
            else if (v == "sgd") c.optimizer = Optimizer::kSgd;
            else throw InputError("unknown optimizer: " + v);
          });

  py::class_<MixtureDensity>(m, "Mixture")
      .def(py::init([](std::vector<double> w, std::vector<double> mu, std::vector<double> var) {
             MixtureDensity d{std::move(w), std::move(mu), std::move(var)};
             d.validate();
             return d;
           }),
           py::arg("weights"), py::arg("means"), py::arg("variances"))
      .def_readonly("weights", &MixtureDensity::weights)
      .def_readonly("means", &MixtureDensity::means)
      .def_readonly("variances", &MixtureDensity::variances)
      .def("log_density", [](const MixtureDensity& d, double y) { return log_density(d, y); });

  py::class_<ConditionalDensityModel>(m, "Model")
      .def_static("load", &ConditionalDensityModel::load)
      .def("save", &ConditionalDensityModel::save)
      .def_property_readonly("input_dim", &ConditionalDensityModel::input_dim)
      .def("digest", &ConditionalDensityModel::digest)
      .def("evaluate",
           [](const ConditionalDensityModel& mdl, std::vector<double> x, double t) {
             return mdl.evaluate(x, t);
           })
      .def("mean_nll", &ConditionalDensityModel::mean_nll)
      .def("to_json", [](const ConditionalDensityModel& mdl) { return mdl.to_json().dump(); });

  py::class_<BootstrapEnsemble>(m, "Ensemble")
      .def_static("load", &BootstrapEnsemble::load)
      .def("save", &BootstrapEnsemble::save)
      .def("__len__", &BootstrapEnsemble::size)
      .def("digest", &BootstrapEnsemble::digest)
      .def_readonly("seeds", &BootstrapEnsemble::seeds);

  py::class_<BoundSpec>(m, "BoundSpec")
      .def(py::init(&make_spec), py::arg("optimizer") = "grid", py::arg("estimator") = "mc",
           py::arg("mc_samples") = 1024, py::arg("gh_order") = 64, py::arg("seed") = 0);

  m.def("generate", &generate, py::arg("config") = SyntheticConfig{});
  m.def("true_capo", &true_capo, py::arg("x"), py::arg("t"));
  m.def("true_apo", &true_apo, py::arg("t"));
  m.def("lambda_star", &lambda_star, py::arg("t"), py::arg("x"), py::arg("u"),
        py::arg("config") = SyntheticConfig{});

  m.def("train", [](const Dataset& d, const DensityModelConfig& c) { return train(d, c); },
        py::arg("data"), py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("fit_ensemble", &fit_ensemble, py::arg("data"), py::arg("config"), py::arg("n_b"),
        py::arg("seed"), py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("conditional_mean", &conditional_mean);
  m.def("hermite_rule", [](int order) {
    const auto r = hermite_rule(order);
    return py::make_tuple(r.nodes, r.weights);
  });
  m.def("quantile", [](std::vector<double> v, double q) { return quantile(v, q); });

  m.def(
      "capo_bounds",
      [](const ConditionalDensityModel& mdl, std::vector<double> x, double t, double lambda,
         const BoundSpec& spec) { return bound_dict(capo_bounds(mdl, x, t, Lambda(lambda), spec)); },
      py::arg("model"), py::arg("x"), py::arg("t"), py::arg("lambda_"),
      py::arg("spec") = BoundSpec{});
  m.def(
      "apo_bounds",
      [](const ConditionalDensityModel& mdl, std::vector<double> xs, double t, double lambda,
         const BoundSpec& spec) { return bound_dict(apo_bounds(mdl, xs, t, Lambda(lambda), spec)); },
      py::arg("model"), py::arg("xs"), py::arg("t"), py::arg("lambda_"),
      py::arg("spec") = BoundSpec{});
  m.def(
      "capo_ci",
      [](const BootstrapEnsemble& e, std::vector<double> x, double t, double lambda, double alpha,
         const BoundSpec& spec) { return ci_dict(capo_ci(e, x, t, Lambda(lambda), alpha, spec)); },
      py::arg("ensemble"), py::arg("x"), py::arg("t"), py::arg("lambda_"),
      py::arg("alpha") = 0.05, py::arg("spec") = BoundSpec{});
  m.def(
      "apo_ci",
      [](const BootstrapEnsemble& e, std::vector<double> xs, double t, double lambda,
         double alpha, const BoundSpec& spec) {
        return ci_dict(apo_ci(e, xs, t, Lambda(lambda), alpha, spec));
      },
      py::arg("ensemble"), py::arg("xs"), py::arg("t"), py::arg("lambda_"),
      py::arg("alpha") = 0.05, py::arg("spec") = BoundSpec{});

  // Returns (exit_code, stdout, stderr).
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
