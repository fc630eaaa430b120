#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "carma_hawkes/inference.hpp"
#include "carma_hawkes/model.hpp"
#include "carma_hawkes/moments.hpp"
#include "carma_hawkes/simulate.hpp"

namespace py = pybind11;
using carma_hawkes::ModelSpec;
namespace inf = carma_hawkes::inference;
namespace sim = carma_hawkes::simulate;

namespace {

ModelSpec make_spec(double mu, std::vector<double> ar, std::vector<double> ma) {
    ModelSpec spec;
    spec.mu = mu;
    spec.ar = std::move(ar);
    spec.ma = std::move(ma);
    spec.validate();
    return spec;
}

py::dict validity_dict(const carma_hawkes::ValidityReport& report) {
    py::dict doc;
    doc["branching_ratio"] = report.branching_ratio;
    doc["stationary"] = report.stationary;
    doc["moments_exist"] = report.moments_exist;
    doc["acf_exists"] = report.acf_exists;
    doc["kernel_nonnegative"] = report.kernel_verdict.nonnegative();
    doc["kernel_rule"] = report.kernel_verdict.rule;
    doc["diagnostics"] = report.diagnostics;
    return doc;
}

py::dict fit_dict(const inf::FitResult& fit) {
    py::dict doc;
    doc["mu"] = fit.spec.mu;
    doc["ar"] = fit.spec.ar;
    doc["ma"] = fit.spec.ma;
    doc["objective"] = fit.objective;
    doc["converged"] = fit.converged;
    doc["iterations"] = fit.iterations;
    if (fit.stderrs.has_value())
        doc["stderrs"] = *fit.stderrs;
    else
        doc["stderrs"] = py::none();
    doc["validity"] = validity_dict(fit.validity);
    return doc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CARMA-kernel self-exciting point processes";

    py::class_<ModelSpec>(m, "ModelSpec")
        .def(py::init(&make_spec), py::arg("mu"), py::arg("ar"), py::arg("ma"))
        .def_readonly("mu", &ModelSpec::mu)
        .def_readonly("ar", &ModelSpec::ar)
        .def_readonly("ma", &ModelSpec::ma)
        .def("__repr__", [](const ModelSpec& spec) {
            std::string out = "ModelSpec(mu=" + std::to_string(spec.mu) + ", ar=[";
            for (const double a : spec.ar) out += std::to_string(a) + ",";
            out += "], ma=[";
            for (const double b : spec.ma) out += std::to_string(b) + ",";
            return out + "])";
        });

    m.def("check_validity",
          [](const ModelSpec& spec) {
              return validity_dict(carma_hawkes::check_validity(spec));
          },
          py::arg("spec"));

    m.def("kernel_h", &carma_hawkes::kernel_h, py::arg("spec"), py::arg("t"));
    m.def("stationary_mean_increment", &carma_hawkes::stationary_mean_increment,
          py::arg("spec"), py::arg("tau"));
    m.def("longrun_var", &carma_hawkes::longrun_var, py::arg("spec"),
          py::arg("tau"));
    m.def("longrun_cov", &carma_hawkes::longrun_cov, py::arg("spec"),
          py::arg("tau"), py::arg("delta"));
    m.def("theoretical_acf", &carma_hawkes::theoretical_acf, py::arg("spec"),
          py::arg("tau"), py::arg("max_lag"));

    m.def("simulate_path",
          [](const ModelSpec& spec, std::optional<double> horizon,
             std::optional<std::size_t> max_events, std::uint64_t seed) {
              sim::SimConfig config;
              config.horizon = horizon;
              config.max_events = max_events;
              config.seed = seed;
              return sim::simulate_path(spec, config).times;
          },
          py::arg("spec"), py::arg("horizon") = py::none(),
          py::arg("max_events") = py::none(), py::arg("seed") = 0);

    m.def("intensity_path", &sim::intensity_path, py::arg("spec"),
          py::arg("events"), py::arg("grid"));

    m.def("log_likelihood", &inf::log_likelihood, py::arg("spec"),
          py::arg("events"));

    m.def("mle_fit",
          [](const std::vector<double>& events, int p, int q,
             std::optional<ModelSpec> init, std::uint64_t seed, int starts) {
              inf::FitOptions options;
              options.seed = seed;
              options.starts = starts;
              return fit_dict(inf::mle_fit(events, p, q, init, options));
          },
          py::arg("events"), py::arg("p"), py::arg("q"),
          py::arg("init") = py::none(), py::arg("seed") = 0,
          py::arg("starts") = 8);

    m.def("mme_fit",
          [](const std::vector<double>& events, int p, int q, double tau,
             int lags, std::uint64_t seed, int starts) {
              inf::FitOptions options;
              options.seed = seed;
              options.starts = starts;
              return fit_dict(inf::mme_fit(events, p, q, tau, lags, options));
          },
          py::arg("events"), py::arg("p"), py::arg("q"), py::arg("tau") = 1.0,
          py::arg("lags") = 20, py::arg("seed") = 0, py::arg("starts") = 8);

    m.def("empirical_acf",
          [](const std::vector<double>& events, double tau, double horizon,
             int max_lag) {
              const auto binned = inf::bin_events(events, tau, horizon);
              const auto summary = inf::empirical_acf(binned, max_lag);
              py::dict doc;
              doc["mean"] = summary.mean;
              doc["variance"] = summary.variance;
              doc["acf"] = summary.acf;
              return doc;
          },
          py::arg("events"), py::arg("tau"), py::arg("horizon"),
          py::arg("max_lag"));

    m.def("acf_confidence",
          [](const std::vector<double>& events, double tau, double horizon,
             int max_lag, double level) {
              const auto binned = inf::bin_events(events, tau, horizon);
              const auto bands = inf::acf_confidence(binned, max_lag, level);
              std::vector<std::pair<double, double>> out;
              out.reserve(bands.lo.size());
              for (std::size_t j = 0; j < bands.lo.size(); ++j)
                  out.emplace_back(bands.lo[j], bands.hi[j]);
              return out;
          },
          py::arg("events"), py::arg("tau"), py::arg("horizon"),
          py::arg("max_lag"), py::arg("level") = 0.95);

    m.def("residual_ks",
          [](const ModelSpec& spec, const std::vector<double>& events) {
              const auto report = inf::residual_ks(spec, events);
              py::dict doc;
              doc["statistic"] = report.statistic;
              doc["p_value"] = report.p_value;
              doc["residuals"] = report.residuals;
              return doc;
          },
          py::arg("spec"), py::arg("events"));
}
