#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ralab/discriminators.hpp"
#include "ralab/divergences.hpp"
#include "ralab/experiments.hpp"
#include "ralab/generators.hpp"
#include "ralab/laplace.hpp"
#include "ralab/serialization.hpp"
#include "ralab/stats.hpp"

namespace py = pybind11;
using namespace ralab;

namespace {

nlohmann::json to_cpp(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

GaussianSpec gaussian(const Vector& mean, const Matrix& cov) {
  GaussianSpec g{mean, cov};
  validate(g);
  return g;
}

py::dict ipm_dict(const IpmResult& r) {
  py::dict d;
  d["value"] = r.value;
  d["stderr"] = r.stderr_;
  d["validation"] = r.validation;
  d["best_restart"] = r.best_restart;
  return d;
}

IpmConfig ipm_config(std::size_t restarts, std::size_t steps, double step_size, std::uint64_t seed) {
  IpmConfig c;
  c.restarts = restarts;
  c.steps = steps;
  c.step_size = step_size;
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(ralab, m) {
  m.doc() = "Restricted approximability toolkit: generators, discriminator families and distances";

  // base first: translators run in reverse registration order
  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
  py::register_exception<ConstraintViolation>(m, "ConstraintViolation", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  // datasets
  m.def("make_circle", &make_circle, py::arg("n"), py::arg("seed"));
  m.def("make_swissroll", &make_swissroll, py::arg("n"), py::arg("seed"));

  py::class_<InvertibleGeneratorSpec>(m, "InvertibleGenerator")
      .def_static("ground_truth", &make_ground_truth_generator, py::arg("dim"), py::arg("layers"), py::arg("seed"))
      .def_static("from_dict", [](const py::object& d) { return invertible_from_json(to_cpp(d)); })
      .def("to_dict", [](const InvertibleGeneratorSpec& g) { return to_py(to_json(g)); })
      .def_property_readonly("dim", &InvertibleGeneratorSpec::dim)
      .def_property_readonly("depth", &InvertibleGeneratorSpec::depth)
      .def("forward", &invertible_forward_batch, py::arg("z"))
      .def("inverse", &invertible_inverse_batch, py::arg("x"))
      .def("log_density", &log_density_invertible_batch, py::arg("x"))
      .def("sample", [](const InvertibleGeneratorSpec& g, std::size_t n, std::uint64_t seed) { return sample(g, n, seed); },
           py::arg("n"), py::arg("seed"))
      .def("violations", &constraint_violations)
      .def("perturb", [](const InvertibleGeneratorSpec& g, double s, std::uint64_t seed) {
        return perturb_generator(g, s, seed).spec;
      }, py::arg("noise_scale"), py::arg("seed"));

  py::class_<LogDensityNetSpec>(m, "LogDensityNet")
      .def(py::init([](const InvertibleGeneratorSpec& g) { return build_logdensity_net(g); }), py::arg("generator"))
      .def_readonly("C", &LogDensityNetSpec::C)
      .def("__call__", &eval_logdensity_net_batch, py::arg("x"))
      .def("to_dict", [](const LogDensityNetSpec& n) { return to_py(to_json(n)); });

  // closed forms
  m.def("w2_gaussian", [](const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2) {
    return w2_gaussian(gaussian(m1, c1), gaussian(m2, c2));
  }, py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"));
  m.def("kl_gaussian", [](const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2) {
    return kl_gaussian(gaussian(m1, c1), gaussian(m2, c2));
  }, py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"));
  m.def("gaussian_expected_relu", [](const Vector& mean, const Matrix& cov, const Vector& v, double b) {
    return gaussian_expected_relu(gaussian(mean, cov), v, b);
  }, py::arg("mean"), py::arg("cov"), py::arg("v"), py::arg("b"));
  m.def("expected_relu_standard", &expected_relu_standard, py::arg("a"));

  // distances
  m.def("w1_exact", &w1_exact, py::arg("batch_p"), py::arg("batch_q"));
  m.def("relu_ipm", [](const Matrix& p, const Matrix& q, double bound, std::size_t restarts, std::size_t steps,
                       double step_size, std::uint64_t seed) {
    if (p.cols() != q.cols()) throw ShapeError("relu_ipm: batches differ in dimension");
    return ipm_dict(ipm_empirical(ReluFamily(p.cols(), bound), p, q, ipm_config(restarts, steps, step_size, seed)));
  }, py::arg("batch_p"), py::arg("batch_q"), py::arg("bound") = 2.0, py::arg("restarts") = 5, py::arg("steps") = 500,
        py::arg("step_size") = 1e-2, py::arg("seed") = 0,
        "Empirical IPM of the ReLU family max(v.x + b, 0), |v| <= 1, |b| <= bound, between two fixed samples.");
  m.def("relu_ipm_gaussian", [](const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2, double bound,
                                std::size_t restarts, std::size_t steps, double step_size, std::uint64_t seed) {
    const GaussianSpec p = gaussian(m1, c1), q = gaussian(m2, c2);
    return ipm_dict(ipm_estimate(ReluFamily(p.dim(), bound), [p](std::size_t n, std::uint64_t s) { return sample(p, n, s); },
                                 [q](std::size_t n, std::uint64_t s) { return sample(q, n, s); },
                                 ipm_config(restarts, steps, step_size, seed)));
  }, py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"), py::arg("bound") = 2.0,
        py::arg("restarts") = 5, py::arg("steps") = 500, py::arg("step_size") = 1e-2, py::arg("seed") = 0);

  // smoothed densities of injective generators
  m.def("laplace_log_density", [](const py::object& generator, const Vector& x, double beta, std::uint64_t seed) {
    LaplaceConfig c;
    c.beta = beta;
    c.seed = seed;
    c.validate();
    return laplace_log_density(injective_from_json(to_cpp(generator)), SmoothedDensityQuery::at(x, beta), c).log_density;
  }, py::arg("generator"), py::arg("x"), py::arg("beta"), py::arg("seed") = 0);
  m.def("mc_log_density", [](const py::object& generator, const Vector& x, double beta, std::size_t n, std::uint64_t seed) {
    const McResult r = mc_log_density_oracle(injective_from_json(to_cpp(generator)), SmoothedDensityQuery::at(x, beta),
                                             beta, n, seed);
    return py::make_tuple(r.value, r.stderr_);
  }, py::arg("generator"), py::arg("x"), py::arg("beta"), py::arg("n") = 100000, py::arg("seed") = 0);

  // experiments
  m.def("default_config", [](const std::string& kind, const std::string& scale) {
    const ExperimentConfig c = ExperimentConfig::defaults(kind, scale);
    c.validate();
    return to_py(c.to_json());
  }, py::arg("kind"), py::arg("scale") = "desk");
  m.def("run_experiment", [](const py::object& config, const std::string& out_dir) {
    const ExperimentConfig c = ExperimentConfig::from_json(to_cpp(config));
    nlohmann::json summary;
    {
      py::gil_scoped_release release;
      summary = run_experiment(c, out_dir);
    }
    return to_py(summary);
  }, py::arg("config"), py::arg("out_dir"));

  m.def("pearson", &pearson);
  m.def("spearman", &spearman);
}
