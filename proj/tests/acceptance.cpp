// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion;
// the exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "carma_hawkes/inference.hpp"
#include "carma_hawkes/linalg.hpp"
#include "carma_hawkes/model.hpp"
#include "carma_hawkes/moments.hpp"
#include "carma_hawkes/rng.hpp"
#include "carma_hawkes/simulate.hpp"

using carma_hawkes::CompanionSet;
using carma_hawkes::Matrix;
using carma_hawkes::ModelSpec;
using carma_hawkes::Rng;
using carma_hawkes::Vector;
namespace inf = carma_hawkes::inference;
namespace lin = carma_hawkes::linalg;
namespace sim = carma_hawkes::simulate;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void report(int index, const char* name, bool pass, double seconds) {
    std::printf("criterion %d %-42s %s (%.1f s)\n", index, name,
                pass ? "PASS" : "FAIL", seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

ModelSpec study_spec() {
    const double pi2 = M_PI * M_PI;
    ModelSpec spec;
    spec.mu = 0.3;
    spec.ar = {1.3, 0.34 + pi2 / 4.0, 0.025 + 0.025 * pi2};
    spec.ma = {0.2, 0.3};
    return spec;
}

ModelSpec hawkes_spec() {
    ModelSpec spec;
    spec.mu = 0.2;
    spec.ar = {0.7};
    spec.ma = {0.5};
    return spec;
}

bool close(double got, double expected, double tol) {
    return std::abs(got - expected) <= tol;
}

// criterion 1: reference stationarity diagnostics on the study model
void criterion_1() {
    Timer timer;
    const ModelSpec spec = study_spec();
    const auto validity = carma_hawkes::check_validity(spec);
    const auto tail = carma_hawkes::kernel_tail(spec);
    bool pass = true;
    pass &= close(validity.branching_ratio, 0.7359973, 1e-4);
    pass &= close(lin::max_real_part(validity.spectrum_A), -0.1012, 1e-3);
    pass &= close(lin::max_real_part(validity.spectrum_Atilde), -0.02903, 1e-4);
    // the two reference values below do not hold for this model: the large
    // second-moment matrix has max real eigenvalue 2 * (-0.02904) = -0.05808,
    // and the kernel tail coefficient evaluates to 0.06588. Both deviations
    // are reproducible from first principles, so these sub-checks are
    // expected to fail and are reported honestly.
    const double atilde2 = lin::max_real_part(validity.spectrum_Atilde2);
    if (!close(atilde2, -0.0290, 1e-3)) {
        std::printf("  note: max Re eig of the second-moment matrix is "
                    "%.6f, not -0.0290\n", atilde2);
        pass = false;
    }
    if (!close(tail.coefficient, 1.9800, 0.01)) {
        std::printf("  note: kernel tail coefficient is %.6f, not 1.9800\n",
                    tail.coefficient);
        pass = false;
    }
    pass &= close(tail.rate, -0.1012, 1e-3);
    pass &= timer.seconds() < 1.0;
    report(1, "stationarity diagnostics", pass, timer.seconds());
}

// criterion 2: CAR(1) machinery equals the closed-form Hawkes moments
void criterion_2() {
    Timer timer;
    Rng rng(2);
    bool pass = true;
    for (int trial = 0; trial < 200; ++trial) {
        const double beta = 0.2 + 2.0 * rng.uniform_open();
        const double alpha = beta * (0.05 + 0.9 * rng.uniform_open());
        const double mu = 0.05 + rng.uniform_open();
        ModelSpec spec;
        spec.mu = mu;
        spec.ar = {beta};
        spec.ma = {alpha};
        for (const double tau : {0.5, 1.0, 2.0}) {
            for (const double delta : {0.0, 1.0, 5.0}) {
                const auto oracle =
                    carma_hawkes::hawkes_oracle(mu, alpha, beta, tau, delta);
                const double mean =
                    carma_hawkes::stationary_mean_increment(spec, tau);
                const double var = carma_hawkes::longrun_var(spec, tau);
                const double cov = carma_hawkes::longrun_cov(spec, tau, delta);
                pass &= std::abs(mean - oracle.mean) <= 1e-9 * oracle.mean;
                pass &= std::abs(var - oracle.var) <= 1e-9 * oracle.var;
                pass &= std::abs(cov - oracle.cov) <= 1e-9 * oracle.var;
                pass &= std::abs(cov / var - oracle.acf) <= 1e-9;
            }
        }
    }
    pass &= timer.seconds() < 10.0;
    report(2, "closed-form oracle equivalence", pass, timer.seconds());
}

// criterion 3: rank-1 product identity and printed reference matrices
void criterion_3() {
    Timer timer;
    bool pass = true;
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const int p = 1 + static_cast<int>(rng.uniform_open() * 5);
        ModelSpec spec;
        spec.mu = 0.1 + rng.uniform_open();
        for (int i = 0; i < p; ++i)
            spec.ar.push_back(0.1 + 2.0 * rng.uniform_open());
        for (int i = 0; i < p; ++i)
            spec.ma.push_back(rng.uniform_open());
        const CompanionSet c = carma_hawkes::build_companion_set(spec);
        Vector x(p);
        for (int i = 0; i < p; ++i) x(i) = 2.0 * rng.uniform_open() - 1.0;
        const Vector b = Eigen::Map<const Vector>(spec.ma.data(), p);
        const Vector lhs = (x * x.transpose()) * b;
        const Vector rhs = c.Bmat * carma_hawkes::vlt(x);
        pass &= (lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12;
        pass &= (c.Atilde - (c.A + c.e * b.transpose()))
                    .cwiseAbs()
                    .maxCoeff() == 0.0;
    }

    ModelSpec ref;
    ref.mu = 0.3;
    ref.ar = {1.1, 0.9, 0.4};
    ref.ma = {0.25, 0.15, 0.05};
    const double a1 = 1.1, a2 = 0.9, a3 = 0.4;
    const double b0 = 0.25, b1 = 0.15, b2 = 0.05;
    const CompanionSet c = carma_hawkes::build_companion_set(ref);
    Matrix expected_a2(6, 6);
    expected_a2 << 0, 2, 0, 0, 0, 0,
                   0, 0, 1, 1, 0, 0,
                   b0 - a3, b1 - a2, b2 - a1, 0, 1, 0,
                   0, 0, 0, 0, 2, 0,
                   0, b0 - a3, 0, b1 - a2, b2 - a1, 1,
                   0, 0, 2 * (b0 - a3), 0, 2 * (b1 - a2), 2 * (b2 - a1);
    Matrix expected_b(3, 6);
    expected_b << b0, b1, b2, 0, 0, 0,
                  0, b0, 0, b1, b2, 0,
                  0, 0, b0, 0, b1, b2;
    pass &= (c.Atilde2 - expected_a2).cwiseAbs().maxCoeff() == 0.0;
    pass &= (c.Bmat - expected_b).cwiseAbs().maxCoeff() == 0.0;
    pass &= timer.seconds() < 5.0;
    report(3, "second-moment matrix constructions", pass, timer.seconds());
}

// criterion 4: Monte Carlo binned moments vs closed forms over 1e6 units
void criterion_4() {
    Timer timer;
    const ModelSpec spec = study_spec();
    sim::SimConfig config;
    config.horizon = 1.0e6;
    config.seed = 4;
    const auto path = sim::simulate_path(spec, config);
    auto binned = inf::bin_events(path.times, 1.0, *config.horizon);
    const std::size_t burn = 5000;
    binned.counts.erase(binned.counts.begin(),
                        binned.counts.begin() + static_cast<long>(burn));
    const auto n = static_cast<double>(binned.counts.size());

    double mean = 0.0;
    for (const long c : binned.counts) mean += static_cast<double>(c);
    mean /= n;
    double var = 0.0;
    for (const long c : binned.counts) var += (c - mean) * (c - mean);
    var /= n;

    // batch means give the standard errors of the sample mean and variance
    const std::size_t batch = 5000;
    std::vector<double> batch_mean, batch_var;
    for (std::size_t start = 0; start + batch <= binned.counts.size();
         start += batch) {
        double bm = 0.0, bv = 0.0;
        for (std::size_t i = start; i < start + batch; ++i)
            bm += static_cast<double>(binned.counts[i]);
        bm /= static_cast<double>(batch);
        for (std::size_t i = start; i < start + batch; ++i)
            bv += (binned.counts[i] - mean) * (binned.counts[i] - mean);
        bv /= static_cast<double>(batch);
        batch_mean.push_back(bm);
        batch_var.push_back(bv);
    }
    const auto batch_se = [&](const std::vector<double>& values) {
        const auto b = static_cast<double>(values.size());
        double m = std::accumulate(values.begin(), values.end(), 0.0) / b;
        double s = 0.0;
        for (const double v : values) s += (v - m) * (v - m);
        return std::sqrt(s / (b - 1.0) / b);
    };

    bool pass = true;
    pass &= std::abs(mean - carma_hawkes::stationary_mean_increment(spec, 1.0)) <
            3.0 * batch_se(batch_mean);
    pass &= std::abs(var - carma_hawkes::longrun_var(spec, 1.0)) <
            3.0 * batch_se(batch_var);

    const auto summary = inf::empirical_acf(binned, 10);
    const auto bands = inf::acf_confidence(binned, 10, 0.95);
    const auto theory = carma_hawkes::theoretical_acf(spec, 1.0, 10);
    const double z = inf::normal_quantile(0.975);
    for (int d = 1; d <= 10; ++d) {
        const double se = 0.5 * (bands.hi[d - 1] - bands.lo[d - 1]) / z;
        pass &= std::abs(summary.acf[d - 1] - theory[d - 1]) < 3.0 * se;
    }
    pass &= timer.seconds() < 600.0;
    report(4, "Monte Carlo moments", pass, timer.seconds());
}

std::vector<double> fixed_path(const ModelSpec& spec, double horizon,
                               std::uint64_t seed) {
    sim::SimConfig config;
    config.horizon = horizon;
    config.seed = seed;
    return sim::simulate_path(spec, config).times;
}

bool within(const ModelSpec& got, const ModelSpec& truth, double tol) {
    bool ok = std::abs(got.mu - truth.mu) <= tol;
    for (std::size_t i = 0; i < truth.ar.size(); ++i)
        ok &= std::abs(got.ar[i] - truth.ar[i]) <= tol;
    for (std::size_t i = 0; i < truth.ma.size(); ++i)
        ok &= std::abs(got.ma[i] - truth.ma[i]) <= tol;
    return ok;
}

// criteria 5 and 6 share the two fixed simulated paths
void criteria_5_and_6() {
    const ModelSpec hawkes = hawkes_spec();
    const ModelSpec carma = study_spec();
    const auto hawkes_path = fixed_path(hawkes, 15000.0, 1001);
    const auto carma_path = fixed_path(carma, 15000.0, 1004);

    Timer timer5;
    inf::FitOptions options;
    options.seed = 5;
    options.starts = 6;
    bool pass5 = true;
    const auto hawkes_mle = inf::mle_fit(hawkes_path, 1, 0, std::nullopt, options);
    pass5 &= hawkes_mle.converged && within(hawkes_mle.spec, hawkes, 0.08);
    const auto carma_mle = inf::mle_fit(carma_path, 3, 1, std::nullopt, options);
    pass5 &= carma_mle.converged && within(carma_mle.spec, carma, 0.35);
    pass5 &= timer5.seconds() < 900.0;
    report(5, "maximum likelihood recovery", pass5, timer5.seconds());

    Timer timer6;
    bool pass6 = true;
    const int lags = 20;
    const auto hawkes_mme = inf::mme_fit(hawkes_path, 1, 0, 1.0, lags, options);
    pass6 &= hawkes_mme.converged && within(hawkes_mme.spec, hawkes, 0.08);
    const auto carma_mme = inf::mme_fit(carma_path, 3, 1, 1.0, lags, options);
    pass6 &= carma_mme.converged && within(carma_mme.spec, carma, 0.35);

    // optimizer sanity: the fitted objective beats the objective at truth
    for (const auto* pair :
         {&hawkes_path, &carma_path}) {
        const bool is_hawkes = pair == &hawkes_path;
        const ModelSpec& truth = is_hawkes ? hawkes : carma;
        const ModelSpec& est = is_hawkes ? hawkes_mme.spec : carma_mme.spec;
        const auto binned = inf::bin_events(*pair, 1.0, 15000.0);
        const auto summary = inf::empirical_acf(binned, lags);
        const auto objective = [&](const ModelSpec& spec) {
            const double var = carma_hawkes::longrun_var(spec, 1.0);
            double sum = 0.0;
            for (int d = 1; d <= lags; ++d) {
                const double rho =
                    carma_hawkes::longrun_cov(spec, 1.0, d - 1.0) / var;
                sum += (summary.acf[d - 1] - rho) * (summary.acf[d - 1] - rho);
            }
            return sum;
        };
        pass6 &= objective(est) <= objective(truth) + 1e-12;
    }
    report(6, "moment-matching recovery", pass6, timer6.seconds());
}

// criterion 7: exactness of the inverse-compensator sampler
void criterion_7() {
    Timer timer;
    const ModelSpec spec = study_spec();
    sim::SimConfig config;
    config.max_events = 10000;
    config.seed = 7;
    config.root_tolerance = 1e-10;
    const auto path = sim::simulate_path(spec, config);

    bool pass = path.times.size() == 10000;
    const auto report_ks = inf::residual_ks(spec, path.times);
    pass &= report_ks.p_value > 0.01;

    sim::Engine engine(spec);
    Rng rng(7);
    sim::SimState state = sim::initial_state(3);
    const auto& c = engine.companions();
    for (const double t : path.times) {
        const double u = rng.uniform_open();
        const double dt = t - state.last_event;
        const Vector x = state.S * c.e;
        const double residual =
            spec.mu * dt + engine.weighted_integral(dt, x) + std::log(u);
        pass &= std::abs(residual) <= 1e-10 * std::max(1.0, spec.mu * dt);
        sim::advance_state(engine, state, t);
    }
    pass &= timer.seconds() < 60.0;
    report(7, "simulation exactness", pass, timer.seconds());
}

// criterion 8: confidence band behavior for the binned-count sample ACF
void criterion_8() {
    Timer timer;
    const ModelSpec spec = study_spec();
    const auto path = fixed_path(spec, 40000.0, 8);
    const auto binned = inf::bin_events(path, 1.0, 40000.0);
    const auto bands = inf::acf_confidence(binned, 20, 0.95);
    const auto theory = carma_hawkes::theoretical_acf(spec, 1.0, 20);
    int inside = 0;
    for (int d = 1; d <= 20; ++d)
        if (bands.lo[d - 1] <= theory[d - 1] && theory[d - 1] <= bands.hi[d - 1])
            ++inside;
    bool pass = inside >= 18;

    inf::BinnedCounts quarter = binned;
    quarter.counts.resize(10000);
    const auto wide = inf::acf_confidence(quarter, 20, 0.95);
    double ratio_sum = 0.0;
    for (int d = 1; d <= 20; ++d)
        ratio_sum += (wide.hi[d - 1] - wide.lo[d - 1]) /
                     (bands.hi[d - 1] - bands.lo[d - 1]);
    const double ratio = ratio_sum / 20.0;
    pass &= std::abs(ratio - 2.0) <= 0.2;
    report(8, "confidence band behavior", pass, timer.seconds());
}

// criterion 9: matrix-function oracles
void criterion_9() {
    Timer timer;
    Rng rng(9);
    bool pass = true;
    const auto random_matrix = [&](int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                m(i, j) = 2.0 * rng.uniform_open() - 1.0;
        return m;
    };
    const auto series = [](const Matrix& m, double t) {
        Matrix sum = Matrix::Identity(m.rows(), m.cols());
        Matrix term = sum;
        for (int k = 1; k <= 60; ++k) {
            term = term * m * (t / k);
            sum += term;
        }
        return sum;
    };
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_open() * 5);
        const Matrix m = random_matrix(n);
        const double t = 0.1 + 2.0 * rng.uniform_open();
        pass &= (lin::matrix_exponential(m, t) - series(m, t))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-10;

        // composite Simpson quadrature for the integral oracles
        const int steps = 2000;
        const double h = t / steps;
        Matrix integral = Matrix::Zero(n, n);
        for (int k = 0; k <= steps; ++k) {
            const double w = (k == 0 || k == steps) ? 1.0
                             : (k % 2 == 1)         ? 4.0
                                                    : 2.0;
            integral += w * series(m, k * h);
        }
        integral *= h / 3.0;
        pass &= (lin::expm_integral(m, t) - integral).cwiseAbs().maxCoeff() <=
                1e-9 * std::max(1.0, integral.cwiseAbs().maxCoeff());

        const Matrix h11 = random_matrix(n);
        const Matrix h22 = random_matrix(n);
        const Matrix h12 = random_matrix(n);
        Matrix coupled = Matrix::Zero(n, n);
        for (int k = 0; k <= steps; ++k) {
            const double w = (k == 0 || k == steps) ? 1.0
                             : (k % 2 == 1)         ? 4.0
                                                    : 2.0;
            coupled += w * series(h11, t - k * h) * h12 * series(h22, k * h);
        }
        coupled *= h / 3.0;
        pass &= (lin::coupled_block_integral(h11, h12, h22, t) - coupled)
                    .cwiseAbs()
                    .maxCoeff() <=
                1e-8 * std::max(1.0, coupled.cwiseAbs().maxCoeff());
    }
    pass &= timer.seconds() < 30.0;
    report(9, "matrix-function oracles", pass, timer.seconds());
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_7();
    criterion_8();
    criterion_9();
    criteria_5_and_6();
    criterion_4();
    std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
