#include "carma_hawkes/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "carma_hawkes/moments.hpp"
#include "carma_hawkes/rng.hpp"
#include "carma_hawkes/simulate.hpp"

namespace carma_hawkes::inference {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_events(const std::vector<double>& events) {
    double prev = 0.0;
    for (const double t : events) {
        if (!(t > prev) || !std::isfinite(t))
            throw std::invalid_argument(
                "event times must be finite, positive and strictly increasing");
        prev = t;
    }
}

// ---- Nelder-Mead ---------------------------------------------------------

struct NmResult {
    std::vector<double> x;
    double fx{kInf};
    std::size_t iterations{0};
    bool converged{false};
};

NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                     std::vector<double> x0, double step, std::size_t max_iter,
                     double tol) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += step;
    for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    std::vector<std::size_t> order(n + 1);
    NmResult result;
    for (result.iterations = 0; result.iterations < max_iter;
         ++result.iterations) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t lo = order[0], hi = order[n], second = order[n - 1];
        if (std::isfinite(fs[lo]) &&
            (fs[hi] - fs[lo] <= tol * (std::abs(fs[lo]) + tol))) {
            double spread = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                spread = std::max(spread, std::abs(xs[hi][j] - xs[lo][j]));
            if (spread <= 1e-7) {
                result.converged = true;
                break;
            }
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == hi) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        const auto blend = [&](double coef) {
            std::vector<double> y(n);
            for (std::size_t j = 0; j < n; ++j)
                y[j] = centroid[j] + coef * (xs[hi][j] - centroid[j]);
            return y;
        };
        std::vector<double> xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fs[lo]) {
            std::vector<double> xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                xs[hi] = std::move(xe);
                fs[hi] = fe;
            } else {
                xs[hi] = std::move(xr);
                fs[hi] = fr;
            }
        } else if (fr < fs[second]) {
            xs[hi] = std::move(xr);
            fs[hi] = fr;
        } else {
            std::vector<double> xc = blend(fr < fs[hi] ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fs[hi])) {
                xs[hi] = std::move(xc);
                fs[hi] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        xs[i][j] = xs[lo][j] + 0.5 * (xs[i][j] - xs[lo][j]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] < fs[best]) best = i;
    result.x = xs[best];
    result.fx = fs[best];
    return result;
}

// ---- stationarity-enforcing reparameterization ---------------------------
//
// AR side: p unconstrained reals become log coefficients of monic quadratic
// (and, for odd p, one linear) factors z^2 + exp(u1) z + exp(u2); positive
// coefficients make every factor Hurwitz, and products of such factors
// cover exactly the polynomials with negative-real-part roots. MA side:
// b_0 = exp(v_0) keeps the kernel positive at zero, the remaining b_j are
// unconstrained.

std::vector<double> poly_multiply(const std::vector<double>& u,
                                  const std::vector<double>& v) {
    std::vector<double> out(u.size() + v.size() - 1, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i + j] += u[i] * v[j];
    return out;
}

std::vector<double> ar_from_unconstrained(const double* u, int p) {
    std::vector<double> poly{1.0};
    int idx = 0;
    for (int pair = 0; pair + 1 < p; pair += 2) {
        poly = poly_multiply(poly, {1.0, std::exp(u[idx]), std::exp(u[idx + 1])});
        idx += 2;
    }
    if (p % 2 == 1) poly = poly_multiply(poly, {1.0, std::exp(u[idx])});
    return {poly.begin() + 1, poly.end()};  // drop the leading 1
}

std::vector<double> ma_from_unconstrained(const double* u, int q) {
    std::vector<double> ma(static_cast<std::size_t>(q) + 1);
    ma[0] = std::exp(u[0]);
    for (int j = 1; j <= q; ++j) ma[static_cast<std::size_t>(j)] = u[j];
    return ma;
}

// inverse map, for seeding the optimizer from a concrete model
std::vector<double> unconstrained_from_spec(const ModelSpec& spec,
                                            bool with_mu) {
    constexpr double kFloor = 1e-8;
    std::vector<double> u;
    if (with_mu) u.push_back(std::log(std::max(spec.mu, kFloor)));

    const CompanionSet c = build_companion_set(spec);
    Spectrum roots = linalg::eigenvalues(c.A);
    std::vector<double> reals;
    std::vector<std::pair<double, double>> quads;  // (c1, c0)
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        if (std::abs(roots[i].imag()) < 1e-10) {
            reals.push_back(roots[i].real());
            continue;
        }
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (!used[j] && std::abs(roots[j].imag() + roots[i].imag()) < 1e-8 &&
                std::abs(roots[j].real() - roots[i].real()) < 1e-8) {
                used[j] = true;
                break;
            }
        }
        quads.emplace_back(-2.0 * roots[i].real(), std::norm(roots[i]));
    }
    std::sort(reals.begin(), reals.end());
    while (reals.size() >= 2 + (spec.p() % 2)) {
        const double r1 = reals.back();
        reals.pop_back();
        const double r2 = reals.back();
        reals.pop_back();
        quads.emplace_back(-(r1 + r2), r1 * r2);
    }
    for (const auto& [c1, c0] : quads) {
        u.push_back(std::log(std::max(c1, kFloor)));
        u.push_back(std::log(std::max(c0, kFloor)));
    }
    if (!reals.empty()) u.push_back(std::log(std::max(-reals.front(), kFloor)));

    u.push_back(std::log(std::max(spec.ma[0], kFloor)));
    for (int j = 1; j <= spec.q(); ++j)
        u.push_back(spec.ma[static_cast<std::size_t>(j)]);
    return u;
}

// soft penalty for negative kernel values on a coarse grid; zero inside the
// feasible region so it does not bias interior optima
double kernel_penalty(const ModelSpec& spec) {
    const CompanionSet c = build_companion_set(spec);
    const double decay = std::abs(linalg::max_real_part(linalg::eigenvalues(c.A)));
    const double t_max = 40.0 / std::max(decay, 1e-3);
    double penalty = 0.0;
    simulate::Engine engine(spec);
    for (int i = 0; i < 64; ++i) {
        const double t = t_max * (std::pow(1.12, i) - 1.0) / (std::pow(1.12, 63) - 1.0);
        const double h = engine.weighted_propagation(t, c.e);
        if (h < 0.0) penalty += h * h;
    }
    return 1e4 * penalty;
}

double atilde_instability(const CompanionSet& c) {
    return linalg::max_real_part(linalg::eigenvalues(c.Atilde));
}

std::vector<double> theoretical_bin_acf(const ModelSpec& spec, double tau,
                                        int m) {
    const double var = longrun_var(spec, tau);
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int d = 1; d <= m; ++d)
        out[static_cast<std::size_t>(d) - 1] =
            longrun_cov(spec, tau, (d - 1) * tau) / var;
    return out;
}

std::vector<double> autocovariances(const std::vector<long>& counts,
                                    int max_lag) {
    const std::size_t n = counts.size();
    double mean = 0.0;
    for (const long c : counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(n);
    std::vector<double> gamma(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (int d = 0; d <= max_lag; ++d) {
        double acc = 0.0;
        for (std::size_t k = 0; k + static_cast<std::size_t>(d) < n; ++k)
            acc += (static_cast<double>(counts[k]) - mean) *
                   (static_cast<double>(counts[k + static_cast<std::size_t>(d)]) -
                    mean);
        gamma[static_cast<std::size_t>(d)] = acc / static_cast<double>(n);
    }
    return gamma;
}

struct MultiStart {
    NmResult best;
    std::size_t total_iterations{0};
};

MultiStart run_starts(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& center, const FitOptions& opt) {
    MultiStart out;
    Rng rng(opt.seed, 0x6d6c65);
    for (std::size_t s = 0; s < std::max<std::size_t>(opt.starts, 1); ++s) {
        std::vector<double> x0 = center;
        if (s > 0) {
            for (double& v : x0) {
                // Box-Muller jitter around the center
                const double u1 = rng.uniform_open();
                const double u2 = rng.uniform_open();
                v += 0.4 * std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(6.283185307179586 * u2);
            }
        }
        NmResult r = nelder_mead(f, std::move(x0), 0.25, opt.max_iterations,
                                 opt.tolerance);
        out.total_iterations += r.iterations;
        if (r.fx < out.best.fx) out.best = std::move(r);
    }
    return out;
}

// walks the inter-event recursion for X_{T_i^-}, in diagonalized
// coordinates when the engine supports them
struct PathWalker {
    explicit PathWalker(const simulate::Engine& eng)
        : engine(eng), spectral(eng.using_spectral_path()) {
        const auto& c = engine.companions();
        if (spectral) {
            w = Eigen::VectorXcd::Zero(c.A.rows());
            we = engine.to_spectral(c.e);
        } else {
            x = Vector::Zero(c.A.rows());
        }
    }

    // kernel part of the left-limit intensity, b' X_{T_i^-}
    double excitation() const {
        if (spectral) return (engine.b_spectral() * w).value().real();
        return engine.companions().bfull.dot(x);
    }

    // folds in the event at T_i and advances to T_{i+1} = T_i + dt;
    // returns the kernel part of the compensator over the gap
    double step(double dt) {
        if (spectral) {
            const Eigen::VectorXcd wp = w + we;
            const auto& lam = engine.eigenvalues_c();
            std::complex<double> acc(0.0, 0.0);
            for (Eigen::Index i = 0; i < lam.size(); ++i) {
                const std::complex<double> l = lam(i);
                const std::complex<double> phi =
                    std::abs(l) * dt < 1e-14 ? std::complex<double>(dt, 0.0)
                                             : (std::exp(l * dt) - 1.0) / l;
                acc += engine.b_spectral()(i) * phi * wp(i);
                w(i) = std::exp(l * dt) * wp(i);
            }
            return acc.real();
        }
        const Vector x_plus = x + engine.companions().e;
        const double inc = engine.weighted_integral(dt, x_plus);
        x = engine.propagator(dt) * x_plus;
        return inc;
    }

    const simulate::Engine& engine;
    bool spectral;
    Eigen::VectorXcd w;
    Eigen::VectorXcd we;
    Vector x;
};

}  // namespace

double log_likelihood(const ModelSpec& spec, const std::vector<double>& events) {
    spec.validate();
    require_events(events);
    if (events.empty())
        throw std::invalid_argument("log_likelihood needs at least one event");

    simulate::Engine engine(spec);
    const double mu = spec.mu;
    PathWalker walker(engine);
    double sum_ln = 0.0;
    double kernel_compensator = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double lambda = mu + walker.excitation();
        if (!(lambda > 0.0) || !std::isfinite(lambda)) return -kInf;
        sum_ln += std::log(lambda);
        if (i + 1 < events.size())
            kernel_compensator += walker.step(events[i + 1] - events[i]);
    }
    return -mu * events.back() - kernel_compensator + sum_ln;
}

BinnedCounts bin_events(const std::vector<double>& events, double tau,
                        double horizon) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
    BinnedCounts out;
    out.tau = tau;
    out.origin = 0.0;
    const auto n_bins = static_cast<std::size_t>(std::floor(horizon / tau));
    out.counts.assign(n_bins, 0);
    for (const double t : events) {
        const auto idx = static_cast<std::size_t>(std::floor(t / tau));
        if (t >= 0.0 && idx < n_bins) out.counts[idx] += 1;
    }
    return out;
}

AcfSummary empirical_acf(const BinnedCounts& binned, int max_lag) {
    const std::size_t n = binned.counts.size();
    if (max_lag < 1) throw std::invalid_argument("max_lag must be >= 1");
    if (static_cast<std::size_t>(max_lag) * 4 >= n)
        throw std::invalid_argument("max_lag must be below a quarter of the bin count");
    const std::vector<double> gamma = autocovariances(binned.counts, max_lag);
    if (!(gamma[0] > 0.0))
        throw std::runtime_error("degenerate sample: binned counts are constant");
    AcfSummary out;
    double mean = 0.0;
    for (const long c : binned.counts) mean += static_cast<double>(c);
    out.mean = mean / static_cast<double>(n);
    out.variance = gamma[0];
    out.acf.resize(static_cast<std::size_t>(max_lag));
    for (int d = 1; d <= max_lag; ++d)
        out.acf[static_cast<std::size_t>(d) - 1] =
            gamma[static_cast<std::size_t>(d)] / gamma[0];
    return out;
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw std::invalid_argument("probability must lie in (0, 1)");
    // Acklam's rational approximation, |relative error| < 1.15e-9
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r;
    if (prob < p_low) {
        q = std::sqrt(-2.0 * std::log(prob));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
                c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (prob > 1.0 - p_low) return -normal_quantile(1.0 - prob);
    q = prob - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

AcfBand acf_confidence(const BinnedCounts& binned, int max_lag, double level,
                       std::optional<int> bandwidth) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("level must lie in (0, 1)");
    const AcfSummary summary = empirical_acf(binned, max_lag);
    const std::size_t n = binned.counts.size();
    const std::size_t m = static_cast<std::size_t>(max_lag);
    const std::size_t n_w = n - m;
    const double mean = summary.mean;

    // statistics whose sample means are the autocovariances
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n_w),
                      static_cast<Eigen::Index>(m + 1));
    for (std::size_t k = 0; k < n_w; ++k) {
        const double zk = static_cast<double>(binned.counts[k]) - mean;
        for (std::size_t j = 0; j <= m; ++j)
            w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                zk * (static_cast<double>(binned.counts[k + j]) - mean);
    }
    const Eigen::RowVectorXd w_bar = w.colwise().mean();
    Eigen::MatrixXd centered = w.rowwise() - w_bar;

    const int lag_cap = bandwidth.value_or(static_cast<int>(
        std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0))));
    Eigen::MatrixXd sigma =
        centered.transpose() * centered / static_cast<double>(n_w);
    for (int l = 1; l <= lag_cap && static_cast<std::size_t>(l) < n_w; ++l) {
        const auto rows = static_cast<Eigen::Index>(n_w) - l;
        const Eigen::MatrixXd gamma_l = centered.topRows(rows).transpose() *
                                        centered.bottomRows(rows) /
                                        static_cast<double>(n_w);
        const double taper = 1.0 - static_cast<double>(l) / (lag_cap + 1.0);
        sigma += taper * (gamma_l + gamma_l.transpose());
    }

    const double z = normal_quantile(0.5 + 0.5 * level);
    const double g0 = summary.variance;
    AcfBand band;
    band.lo.resize(m);
    band.hi.resize(m);
    for (std::size_t d = 1; d <= m; ++d) {
        const double gd = summary.acf[d - 1] * g0;
        // delta method for rho_d = gamma_d / gamma_0
        const double grad0 = -gd / (g0 * g0);
        const double gradd = 1.0 / g0;
        const auto di = static_cast<Eigen::Index>(d);
        double var_rho = grad0 * grad0 * sigma(0, 0) +
                         2.0 * grad0 * gradd * sigma(0, di) +
                         gradd * gradd * sigma(di, di);
        var_rho = std::max(var_rho, 0.0) / static_cast<double>(n);
        const double half = z * std::sqrt(var_rho);
        band.lo[d - 1] = summary.acf[d - 1] - half;
        band.hi[d - 1] = summary.acf[d - 1] + half;
    }
    return band;
}

KsReport residual_ks(const ModelSpec& spec, const std::vector<double>& events) {
    spec.validate();
    require_events(events);
    if (events.size() < 30)
        throw std::invalid_argument("residual_ks needs at least 30 events");

    simulate::Engine engine(spec);
    KsReport out;
    out.residuals.reserve(events.size() - 1);
    PathWalker walker(engine);
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
        const double dt = events[i + 1] - events[i];
        out.residuals.push_back(spec.mu * dt + walker.step(dt));
    }

    std::vector<double> u;
    u.reserve(out.residuals.size());
    for (const double r : out.residuals) u.push_back(-std::expm1(-r));
    std::sort(u.begin(), u.end());
    const auto n = static_cast<double>(u.size());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double hi = (static_cast<double>(i) + 1.0) / n - u[i];
        const double lo = u[i] - static_cast<double>(i) / n;
        d_stat = std::max({d_stat, hi, lo});
    }
    out.statistic = d_stat;
    // Kolmogorov tail with Stephens' small-sample correction
    const double t = d_stat * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
    double p = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * std::exp(-2.0 * j * j * t * t);
        p += (j % 2 == 1) ? term : -term;
        if (term < 1e-12) break;
    }
    out.p_value = std::min(std::max(p, 0.0), 1.0);
    return out;
}

FitResult mme_fit(const std::vector<double>& events, int p, int q, double tau,
                  int m, const FitOptions& options) {
    require_events(events);
    if (p < 1 || q < 0 || q >= p) throw std::invalid_argument("need 0 <= q < p");
    if (m < p + q + 1)
        throw std::invalid_argument("lag count m must be at least p+q+1");
    if (events.empty()) throw std::invalid_argument("no events");

    const BinnedCounts binned = bin_events(events, tau, events.back());
    const AcfSummary emp = empirical_acf(binned, m);
    const double sample_mean = emp.mean;
    const int dim = p + q + 1;

    const auto profiled_spec = [&](const std::vector<double>& u,
                                   double* penalty) -> std::optional<ModelSpec> {
        ModelSpec spec;
        spec.ar = ar_from_unconstrained(u.data(), p);
        spec.ma = ma_from_unconstrained(u.data() + p, q);
        spec.mu = 1.0;
        const CompanionSet c = build_companion_set(spec);
        const double instab = atilde_instability(c);
        if (instab >= -1e-10) {
            *penalty = 1e6 * (1.0 + instab);
            return std::nullopt;
        }
        const double s = c.bfull.dot(c.Atilde.partialPivLu().solve(c.e));
        const double denom = (1.0 - s) * tau;
        if (!(denom > 1e-10)) {
            *penalty = 1e6;
            return std::nullopt;
        }
        spec.mu = sample_mean / denom;
        if (!(spec.mu > 0.0) || !std::isfinite(spec.mu)) {
            *penalty = 1e6;
            return std::nullopt;
        }
        return spec;
    };

    const auto objective = [&](const std::vector<double>& u) -> double {
        double penalty = 0.0;
        const std::optional<ModelSpec> spec = profiled_spec(u, &penalty);
        if (!spec.has_value()) return penalty;
        double value;
        try {
            const std::vector<double> rho = theoretical_bin_acf(*spec, tau, m);
            value = 0.0;
            for (int d = 0; d < m; ++d) {
                const double diff = emp.acf[static_cast<std::size_t>(d)] -
                                    rho[static_cast<std::size_t>(d)];
                value += diff * diff;
            }
        } catch (const std::exception&) {
            return 1e6;
        }
        return value + kernel_penalty(*spec);
    };

    const std::vector<double> center(static_cast<std::size_t>(dim), 0.0);
    const MultiStart ms = run_starts(objective, center, options);

    FitResult result;
    result.iterations = ms.total_iterations;
    double penalty = 0.0;
    const std::optional<ModelSpec> spec = profiled_spec(ms.best.x, &penalty);
    if (!spec.has_value())
        throw std::runtime_error("mme_fit: step-2 baseline is undefined at the optimum");
    result.spec = *spec;
    result.objective = ms.best.fx;
    result.converged = ms.best.converged && ms.best.fx < 1e5;
    result.validity = check_validity(result.spec);
    return result;
}

namespace {

std::optional<std::vector<double>> hessian_stderrs(
    const ModelSpec& spec, const std::vector<double>& events) {
    std::vector<double> theta;
    theta.push_back(spec.mu);
    theta.insert(theta.end(), spec.ar.begin(), spec.ar.end());
    theta.insert(theta.end(), spec.ma.begin(), spec.ma.end());
    const auto n = static_cast<Eigen::Index>(theta.size());

    const auto eval = [&](const std::vector<double>& th) {
        ModelSpec s;
        s.mu = th[0];
        s.ar.assign(th.begin() + 1, th.begin() + 1 + spec.ar.size());
        s.ma.assign(th.begin() + 1 + static_cast<long>(spec.ar.size()), th.end());
        if (!(s.mu > 0.0)) return -kInf;
        try {
            return log_likelihood(s, events);
        } catch (const std::exception&) {
            return -kInf;
        }
    };

    Eigen::MatrixXd hess(n, n);
    std::vector<double> h(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        h[i] = 1e-4 * std::max(1.0, std::abs(theta[i]));
    const double f0 = eval(theta);
    if (!std::isfinite(f0)) return std::nullopt;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            std::vector<double> t = theta;
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            if (i == j) {
                t[ui] = theta[ui] + h[ui];
                const double fp = eval(t);
                t[ui] = theta[ui] - h[ui];
                const double fm = eval(t);
                hess(i, i) = (fp - 2.0 * f0 + fm) / (h[ui] * h[ui]);
            } else {
                t[ui] += h[ui];
                t[uj] += h[uj];
                const double fpp = eval(t);
                t = theta;
                t[ui] += h[ui];
                t[uj] -= h[uj];
                const double fpm = eval(t);
                t = theta;
                t[ui] -= h[ui];
                t[uj] += h[uj];
                const double fmp = eval(t);
                t = theta;
                t[ui] -= h[ui];
                t[uj] -= h[uj];
                const double fmm = eval(t);
                hess(i, j) = hess(j, i) =
                    (fpp - fpm - fmp + fmm) / (4.0 * h[ui] * h[uj]);
            }
            if (!std::isfinite(hess(i, j))) return std::nullopt;
        }
    }
    const Eigen::MatrixXd info = -hess;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    std::vector<double> out;
    out.reserve(theta.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(cov(i, i) > 0.0)) return std::nullopt;
        out.push_back(std::sqrt(cov(i, i)));
    }
    return out;
}

}  // namespace

FitResult mle_fit(const std::vector<double>& events, int p, int q,
                  const std::optional<ModelSpec>& init,
                  const FitOptions& options) {
    require_events(events);
    if (p < 1 || q < 0 || q >= p) throw std::invalid_argument("need 0 <= q < p");
    if (events.size() < static_cast<std::size_t>((p + q + 2) * 20))
        throw std::invalid_argument("too few events to identify the model");

    const auto spec_from = [&](const std::vector<double>& u) {
        ModelSpec spec;
        spec.mu = std::exp(u[0]);
        spec.ar = ar_from_unconstrained(u.data() + 1, p);
        spec.ma = ma_from_unconstrained(u.data() + 1 + p, q);
        return spec;
    };

    const auto objective = [&](const std::vector<double>& u) -> double {
        const ModelSpec spec = spec_from(u);
        if (!std::isfinite(spec.mu) || spec.mu > 1e8) return 1e12;
        const double ll = log_likelihood(spec, events);
        if (!std::isfinite(ll)) return 1e12;
        double penalty = kernel_penalty(spec);
        const double instab = atilde_instability(build_companion_set(spec));
        if (instab >= 0.0) penalty += 1e4 * (1.0 + instab);
        return -ll + penalty;
    };

    std::vector<double> center;
    if (init.has_value()) {
        init->validate();
        if (init->p() != p || init->q() != q)
            throw std::invalid_argument("init has the wrong model order");
        center = unconstrained_from_spec(*init, true);
    } else {
        FitOptions mme_options = options;
        mme_options.starts = std::max<std::size_t>(options.starts / 2, 2);
        try {
            const FitResult warm = mme_fit(
                events, p, q, 1.0, std::max(20, 2 * (p + q + 1)), mme_options);
            center = unconstrained_from_spec(warm.spec, true);
        } catch (const std::exception&) {
            ModelSpec fallback;
            fallback.mu = 0.5 * static_cast<double>(events.size()) / events.back();
            fallback.ar.assign(static_cast<std::size_t>(p), 0.0);
            for (int i = 1; i <= p; ++i) {
                // (z + 1)^p expansion gives a stable default
                double coef = 1.0;
                for (int j = 0; j < i; ++j)
                    coef = coef * static_cast<double>(p - j) / (j + 1);
                fallback.ar[static_cast<std::size_t>(i) - 1] = coef;
            }
            fallback.ma.assign(static_cast<std::size_t>(q) + 1, 0.0);
            fallback.ma[0] = 0.1;
            center = unconstrained_from_spec(fallback, true);
        }
    }

    const MultiStart ms = run_starts(objective, center, options);

    FitResult result;
    result.spec = spec_from(ms.best.x);
    result.objective = log_likelihood(result.spec, events);
    result.converged = ms.best.converged && std::isfinite(result.objective);
    result.iterations = ms.total_iterations;
    result.validity = check_validity(result.spec);
    result.stderrs = hessian_stderrs(result.spec, events);
    return result;
}

}  // namespace carma_hawkes::inference
