#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carma_hawkes/inference.hpp"
#include "carma_hawkes/io.hpp"
#include "carma_hawkes/model.hpp"
#include "carma_hawkes/moments.hpp"
#include "carma_hawkes/simulate.hpp"

namespace ch = carma_hawkes;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json spectrum_to_json(const ch::Spectrum& spectrum) {
    json arr = json::array();
    for (const auto& z : spectrum) arr.push_back({z.real(), z.imag()});
    return arr;
}

json validity_to_json(const ch::ValidityReport& report) {
    json doc;
    doc["branching_ratio"] = report.branching_ratio;
    doc["stationary"] = report.stationary;
    doc["moments_exist"] = report.moments_exist;
    doc["acf_exists"] = report.acf_exists;
    doc["spectrum_A"] = spectrum_to_json(report.spectrum_A);
    doc["spectrum_Atilde"] = spectrum_to_json(report.spectrum_Atilde);
    doc["spectrum_Atilde2"] = spectrum_to_json(report.spectrum_Atilde2);
    doc["kernel"] = {{"nonnegative", report.kernel_verdict.nonnegative()},
                     {"rule", report.kernel_verdict.rule}};
    if (report.kernel_verdict.first_violation_t.has_value())
        doc["kernel"]["first_violation_t"] = *report.kernel_verdict.first_violation_t;
    doc["diagnostics"] = report.diagnostics;
    return doc;
}

json model_to_json_obj(const ch::ModelSpec& spec) {
    return {{"mu", spec.mu}, {"a", spec.ar}, {"b", spec.ma}};
}

json fit_to_json(const ch::inference::FitResult& fit) {
    json doc;
    doc["model"] = model_to_json_obj(fit.spec);
    doc["objective"] = fit.objective;
    doc["converged"] = fit.converged;
    doc["iterations"] = fit.iterations;
    doc["stderr"] = fit.stderrs.has_value() ? json(*fit.stderrs) : json(nullptr);
    doc["validity"] = validity_to_json(fit.validity);
    return doc;
}

void emit_error(const std::string& kind, const std::string& message,
                const json& detail = json()) {
    json doc = {{"error", kind}, {"message", message}};
    if (!detail.is_null()) doc["detail"] = detail;
    std::cerr << doc.dump(2) << std::endl;
}

// exits 2 unless the model passes check_validity or --force is set
ch::ValidityReport gate_model(const ch::ModelSpec& spec, bool force) {
    ch::ValidityReport report = ch::check_validity(spec);
    if (!report.stationary) {
        if (!force) {
            emit_error("invalid_model", "model fails the validity checks",
                       validity_to_json(report));
            std::exit(2);
        }
        std::cerr << "warning: proceeding with an invalid model (--force)\n";
    }
    return report;
}

ch::io::RunManifest make_manifest(const std::string& command,
                                  const ch::ModelSpec& model,
                                  std::map<std::string, std::string> flags,
                                  std::uint64_t seed) {
    ch::io::RunManifest manifest;
    manifest.command = command;
    manifest.model = model;
    manifest.flags = std::move(flags);
    manifest.seed = seed;
    manifest.tool_version = kVersion;
    manifest.timestamp = ch::io::current_timestamp_utc();
    return manifest;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("CARMA_HAWKES_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_validate(const std::string& model_path, bool as_json) {
    const ch::ModelSpec spec = ch::io::read_model(model_path);
    const ch::ValidityReport report = ch::check_validity(spec);
    if (as_json) {
        std::cout << validity_to_json(report).dump(2) << std::endl;
    } else {
        std::cout << "branching_ratio: " << report.branching_ratio << "\n"
                  << "stationary: " << (report.stationary ? "yes" : "no") << "\n"
                  << "moments_exist: " << (report.moments_exist ? "yes" : "no")
                  << "\n"
                  << "acf_exists: " << (report.acf_exists ? "yes" : "no") << "\n"
                  << "kernel: "
                  << (report.kernel_verdict.nonnegative() ? "nonnegative"
                                                          : "negative somewhere")
                  << " (rule " << report.kernel_verdict.rule << ")\n";
        for (const auto& note : report.diagnostics)
            std::cout << "note: " << note << "\n";
    }
    return report.stationary ? 0 : 2;
}

int cmd_simulate(const std::string& model_path, std::optional<double> horizon,
                 std::optional<std::size_t> events, std::uint64_t seed,
                 const std::string& out, bool force) {
    const ch::ModelSpec spec = ch::io::read_model(model_path);
    gate_model(spec, force);
    ch::simulate::SimConfig config;
    config.horizon = horizon;
    config.max_events = events;
    config.seed = seed;
    const ch::simulate::SimResult result = ch::simulate::simulate_path(spec, config);
    ch::io::write_events(result.times, out);
    std::map<std::string, std::string> flags{{"model", model_path},
                                             {"out", out}};
    if (horizon.has_value()) flags["horizon"] = ch::io::format_double(*horizon);
    if (events.has_value()) flags["events"] = std::to_string(*events);
    if (force) flags["force"] = "true";
    ch::io::write_manifest(make_manifest("simulate", spec, flags, seed), out);
    std::cout << "events: " << result.times.size() << "\n";
    return 0;
}

int cmd_moments(const std::string& model_path, double tau, int max_lag,
                std::optional<double> delta, const std::string& out,
                bool force) {
    const ch::ModelSpec spec = ch::io::read_model(model_path);
    gate_model(spec, force);
    const double mean = ch::stationary_mean_increment(spec, tau);
    const double var = ch::longrun_var(spec, tau);
    std::ostringstream csv;
    csv << "lag,cov,acf\n";
    for (int d = 1; d <= max_lag; ++d) {
        const double cov = ch::longrun_cov(spec, tau, d - 1.0);
        csv << d << "," << ch::io::format_double(cov) << ","
            << ch::io::format_double(cov / var) << "\n";
    }
    write_text(out, csv.str());
    std::map<std::string, std::string> flags{
        {"model", model_path},
        {"tau", ch::io::format_double(tau)},
        {"max_lag", std::to_string(max_lag)},
        {"out", out}};
    json summary = {{"mean_increment", mean}, {"variance", var}, {"tau", tau}};
    if (delta.has_value()) {
        flags["delta"] = ch::io::format_double(*delta);
        summary["cov_at_delta"] = ch::longrun_cov(spec, tau, *delta);
        summary["delta"] = *delta;
    }
    ch::io::write_manifest(make_manifest("moments", spec, flags, 0), out);
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_fit(bool mle, const std::string& events_path, int p, int q, double tau,
            int lags, std::uint64_t seed, std::size_t starts,
            const std::optional<std::string>& init_path, const std::string& out) {
    const std::vector<double> events = ch::io::read_events(events_path);
    ch::inference::FitOptions options;
    options.seed = seed;
    options.starts = starts;
    ch::inference::FitResult fit;
    if (mle) {
        std::optional<ch::ModelSpec> init;
        if (init_path.has_value()) init = ch::io::read_model(*init_path);
        fit = ch::inference::mle_fit(events, p, q, init, options);
    } else {
        fit = ch::inference::mme_fit(events, p, q, tau, lags, options);
    }
    write_text(out, fit_to_json(fit).dump(2) + "\n");
    std::map<std::string, std::string> flags{{"events", events_path},
                                             {"p", std::to_string(p)},
                                             {"q", std::to_string(q)},
                                             {"starts", std::to_string(starts)},
                                             {"out", out}};
    if (!mle) {
        flags["tau"] = ch::io::format_double(tau);
        flags["lags"] = std::to_string(lags);
    }
    if (init_path.has_value()) flags["init"] = *init_path;
    ch::io::write_manifest(
        make_manifest(mle ? "fit-mle" : "fit-mme", fit.spec, flags, seed), out);
    std::cout << fit_to_json(fit).dump(2) << std::endl;
    return 0;
}

int cmd_acf(const std::string& events_path, double tau, int max_lag,
            const std::optional<std::string>& model_path, double level,
            const std::string& out, bool force) {
    const std::vector<double> events = ch::io::read_events(events_path);
    if (events.empty()) throw std::invalid_argument("no events in " + events_path);
    const ch::inference::BinnedCounts binned =
        ch::inference::bin_events(events, tau, events.back());
    const ch::inference::AcfSummary summary =
        ch::inference::empirical_acf(binned, max_lag);
    const ch::inference::AcfBand band =
        ch::inference::acf_confidence(binned, max_lag, level);

    std::optional<ch::ModelSpec> spec;
    std::vector<double> theoretical;
    if (model_path.has_value()) {
        spec = ch::io::read_model(*model_path);
        gate_model(*spec, force);
        const double var = ch::longrun_var(*spec, tau);
        for (int d = 1; d <= max_lag; ++d)
            theoretical.push_back(ch::longrun_cov(*spec, tau, (d - 1) * tau) / var);
    }

    std::ostringstream csv;
    csv << "lag,empirical_acf,lo,hi";
    if (spec.has_value()) csv << ",theoretical_acf";
    csv << "\n";
    for (int d = 1; d <= max_lag; ++d) {
        const auto i = static_cast<std::size_t>(d) - 1;
        csv << d << "," << ch::io::format_double(summary.acf[i]) << ","
            << ch::io::format_double(band.lo[i]) << ","
            << ch::io::format_double(band.hi[i]);
        if (spec.has_value()) csv << "," << ch::io::format_double(theoretical[i]);
        csv << "\n";
    }
    write_text(out, csv.str());
    std::map<std::string, std::string> flags{
        {"events", events_path},
        {"tau", ch::io::format_double(tau)},
        {"max_lag", std::to_string(max_lag)},
        {"level", ch::io::format_double(level)},
        {"out", out}};
    if (model_path.has_value()) flags["model"] = *model_path;
    ch::io::write_manifest(
        make_manifest("acf", spec.value_or(ch::ModelSpec{}), flags, 0), out);
    return 0;
}

int cmd_residuals(const std::string& model_path, const std::string& events_path,
                  const std::string& out, bool force) {
    const ch::ModelSpec spec = ch::io::read_model(model_path);
    gate_model(spec, force);
    const std::vector<double> events = ch::io::read_events(events_path);
    const ch::inference::KsReport report = ch::inference::residual_ks(spec, events);
    json doc = {{"statistic", report.statistic},
                {"p_value", report.p_value},
                {"n_residuals", report.residuals.size()}};
    write_text(out, doc.dump(2) + "\n");
    std::ostringstream csv;
    csv << "residual\n";
    for (const double r : report.residuals) csv << ch::io::format_double(r) << "\n";
    write_text(out + ".residuals.csv", csv.str());
    std::map<std::string, std::string> flags{
        {"model", model_path}, {"events", events_path}, {"out", out}};
    ch::io::write_manifest(make_manifest("residuals", spec, flags, 0), out);
    std::cout << doc.dump(2) << std::endl;
    return 0;
}

// ---- study reproduction ----------------------------------------------------

struct StudyRow {
    double horizon;
    std::size_t n_events;
    ch::inference::FitResult mle;
    ch::inference::FitResult mme;
};

std::string fit_row(const ch::inference::FitResult& fit) {
    std::ostringstream row;
    row.precision(4);
    row << std::fixed << fit.spec.mu;
    for (const double a : fit.spec.ar) row << " | " << a;
    for (const double b : fit.spec.ma) row << " | " << b;
    return row.str();
}

int cmd_reproduce_study(const std::string& out_dir, bool fast) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    ch::ModelSpec hawkes;
    hawkes.mu = 0.2;
    hawkes.ar = {0.7};
    hawkes.ma = {0.5};
    const double pi2 = M_PI * M_PI;
    ch::ModelSpec carma31;
    carma31.mu = 0.3;
    carma31.ar = {1.3, 0.34 + pi2 / 4.0, 0.025 + 0.025 * pi2};
    carma31.ma = {0.2, 0.3};

    std::vector<double> horizons = fast ? std::vector<double>{5000.0}
                                        : std::vector<double>{5000.0, 15000.0,
                                                              25000.0, 50000.0};
    const std::uint64_t base_seed = 1000;  // seed = base + experiment index
    const std::size_t starts = fast ? 2 : 6;

    struct Job {
        const ch::ModelSpec* model;
        std::string name;
        double horizon;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    std::uint64_t index = 0;
    for (const auto* entry : {&hawkes, &carma31}) {
        for (const double horizon : horizons) {
            jobs.push_back({entry, entry == &hawkes ? "hawkes" : "carma31",
                            horizon, base_seed + index});
            ++index;
        }
    }

    std::counting_semaphore<64> slots(
        static_cast<std::ptrdiff_t>(std::min<std::size_t>(thread_cap(), 64)));
    std::vector<std::future<StudyRow>> futures;
    for (const Job& job : jobs) {
        futures.push_back(std::async(std::launch::async, [&slots, &job, starts] {
            slots.acquire();
            StudyRow row;
            row.horizon = job.horizon;
            ch::simulate::SimConfig config;
            config.horizon = job.horizon;
            config.seed = job.seed;
            const auto path = ch::simulate::simulate_path(*job.model, config);
            row.n_events = path.times.size();
            const int p = job.model->p();
            const int q = job.model->q();
            ch::inference::FitOptions options;
            options.seed = job.seed;
            options.starts = starts;
            row.mme = ch::inference::mme_fit(path.times, p, q, 1.0,
                                             std::max(20, 2 * (p + q + 1)),
                                             options);
            row.mle = ch::inference::mle_fit(path.times, p, q, std::nullopt,
                                             options);
            slots.release();
            return row;
        }));
    }

    std::map<std::string, std::vector<StudyRow>> rows;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        rows[jobs[i].name].push_back(futures[i].get());

    std::ostringstream md;
    md << "# Simulation study\n\n";
    for (const auto& [name, model] :
         std::vector<std::pair<std::string, const ch::ModelSpec*>>{
             {"hawkes", &hawkes}, {"carma31", &carma31}}) {
        md << "Truth (" << name << "): " << fit_row({*model, 0, true, 0, {}, {}})
           << "\n\n";
        for (const char* estimator : {"MLE", "MME"}) {
            md << "## " << name << " " << estimator << "\n\n";
            md << "| T | events | mu";
            for (std::size_t i = 0; i < model->ar.size(); ++i)
                md << " | a" << i + 1;
            for (std::size_t i = 0; i < model->ma.size(); ++i) md << " | b" << i;
            md << " |\n|";
            for (std::size_t i = 0;
                 i < 3 + model->ar.size() + model->ma.size(); ++i)
                md << "---|";
            md << "\n";
            for (const StudyRow& row : rows[name]) {
                const auto& fit =
                    std::string(estimator) == "MLE" ? row.mle : row.mme;
                md << "| " << row.horizon << " | " << row.n_events << " | "
                   << fit_row(fit) << " |\n";
            }
            md << "\n";
        }
    }
    write_text(out_dir + "/tables.md", md.str());

    // plot-ready data: counting path, kernel curve, ACF with bands
    {
        ch::simulate::SimConfig config;
        config.horizon = fast ? 5000.0 : 15000.0;
        config.seed = base_seed + 100;
        const auto path = ch::simulate::simulate_path(carma31, config);
        std::ostringstream csv;
        csv << "time,count\n";
        for (std::size_t i = 0; i < path.times.size(); ++i)
            csv << ch::io::format_double(path.times[i]) << "," << i + 1 << "\n";
        write_text(out_dir + "/counting_path_carma31.csv", csv.str());

        const auto binned =
            ch::inference::bin_events(path.times, 1.0, path.horizon);
        const int max_lag = 20;
        const auto summary = ch::inference::empirical_acf(binned, max_lag);
        const auto band = ch::inference::acf_confidence(binned, max_lag, 0.95);
        const double var = ch::longrun_var(carma31, 1.0);
        std::ostringstream acf_csv;
        acf_csv << "lag,empirical_acf,lo,hi,theoretical_acf\n";
        for (int d = 1; d <= max_lag; ++d) {
            const auto i = static_cast<std::size_t>(d) - 1;
            acf_csv << d << "," << ch::io::format_double(summary.acf[i]) << ","
                    << ch::io::format_double(band.lo[i]) << ","
                    << ch::io::format_double(band.hi[i]) << ","
                    << ch::io::format_double(
                           ch::longrun_cov(carma31, 1.0, d - 1) / var)
                    << "\n";
        }
        write_text(out_dir + "/acf_carma31.csv", acf_csv.str());
    }
    {
        std::ostringstream csv;
        csv << "t,kernel\n";
        for (int i = 0; i <= 600; ++i) {
            const double t = 30.0 * i / 600.0;
            csv << ch::io::format_double(t) << ","
                << ch::io::format_double(ch::kernel_h(carma31, t)) << "\n";
        }
        write_text(out_dir + "/kernel_carma31.csv", csv.str());
    }

    ch::io::write_manifest(
        make_manifest("reproduce-study", carma31,
                      {{"out", out_dir}, {"fast", fast ? "true" : "false"}},
                      base_seed),
        out_dir + "/tables.md");
    std::cout << "study written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CARMA(p,q)-Hawkes toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string model_path, events_path, out_path, out_dir;
    std::optional<std::string> init_path;
    std::optional<double> horizon, delta;
    std::optional<std::size_t> max_events;
    std::uint64_t seed = 0;
    std::size_t starts = 8;
    int p = 1, q = 0, max_lag = 20, lags = 20;
    double tau = 1.0, level = 0.95;
    bool as_json = false, force = false, fast = false;

    auto* validate = app.add_subcommand("validate", "check a model");
    validate->add_option("--model", model_path)->required();
    validate->add_flag("--json", as_json);

    auto* simulate = app.add_subcommand("simulate", "sample a path");
    simulate->add_option("--model", model_path)->required();
    auto* opt_h = simulate->add_option("--horizon", horizon);
    auto* opt_k = simulate->add_option("--events", max_events);
    opt_h->excludes(opt_k);
    simulate->add_option("--seed", seed);
    simulate->add_option("--out", out_path)->required();
    simulate->add_flag("--force", force);

    auto* moments = app.add_subcommand("moments", "long-run count moments");
    moments->add_option("--model", model_path)->required();
    moments->add_option("--tau", tau);
    moments->add_option("--max-lag", max_lag);
    moments->add_option("--delta", delta);
    moments->add_option("--out", out_path)->required();
    moments->add_flag("--force", force);

    auto* fit_mle = app.add_subcommand("fit-mle", "maximum likelihood fit");
    fit_mle->add_option("--events", events_path)->required();
    fit_mle->add_option("--p", p)->required();
    fit_mle->add_option("--q", q)->required();
    fit_mle->add_option("--init", init_path);
    fit_mle->add_option("--starts", starts);
    fit_mle->add_option("--seed", seed);
    fit_mle->add_option("--out", out_path)->required();

    auto* fit_mme = app.add_subcommand("fit-mme", "moment-matching fit");
    fit_mme->add_option("--events", events_path)->required();
    fit_mme->add_option("--p", p)->required();
    fit_mme->add_option("--q", q)->required();
    fit_mme->add_option("--tau", tau);
    fit_mme->add_option("--lags", lags);
    fit_mme->add_option("--starts", starts);
    fit_mme->add_option("--seed", seed);
    fit_mme->add_option("--out", out_path)->required();

    auto* acf = app.add_subcommand("acf", "empirical count autocorrelation");
    acf->add_option("--events", events_path)->required();
    acf->add_option("--tau", tau);
    acf->add_option("--max-lag", max_lag);
    acf->add_option("--model", init_path);
    acf->add_option("--level", level);
    acf->add_option("--out", out_path)->required();
    acf->add_flag("--force", force);

    auto* residuals = app.add_subcommand("residuals", "time-rescaling diagnostics");
    residuals->add_option("--model", model_path)->required();
    residuals->add_option("--events", events_path)->required();
    residuals->add_option("--out", out_path)->required();
    residuals->add_flag("--force", force);

    auto* study = app.add_subcommand("reproduce-study",
                                     "rerun the simulation study end to end");
    study->add_option("--out", out_dir)->required();
    study->add_flag("--fast", fast);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);
        emit_error("invalid_arguments", err.what());
        return 1;
    }

    try {
        if (validate->parsed()) return cmd_validate(model_path, as_json);
        if (simulate->parsed()) {
            if (!horizon.has_value() && !max_events.has_value())
                throw std::invalid_argument("set --horizon or --events");
            return cmd_simulate(model_path, horizon, max_events, seed, out_path,
                                force);
        }
        if (moments->parsed())
            return cmd_moments(model_path, tau, max_lag, delta, out_path, force);
        if (fit_mle->parsed())
            return cmd_fit(true, events_path, p, q, tau, lags, seed, starts,
                           init_path, out_path);
        if (fit_mme->parsed())
            return cmd_fit(false, events_path, p, q, tau, lags, seed, starts,
                           std::nullopt, out_path);
        if (acf->parsed())
            return cmd_acf(events_path, tau, max_lag, init_path, level, out_path,
                           force);
        if (residuals->parsed())
            return cmd_residuals(model_path, events_path, out_path, force);
        if (study->parsed()) return cmd_reproduce_study(out_dir, fast);
    } catch (const std::invalid_argument& err) {
        emit_error("invalid_arguments", err.what());
        return 1;
    } catch (const std::exception& err) {
        emit_error("numerical_failure", err.what());
        return 3;
    }
    return 1;
}
