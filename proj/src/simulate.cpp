#include "carma_hawkes/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "carma_hawkes/moments.hpp"

namespace carma_hawkes::simulate {

namespace {

constexpr double kRunawayFactor = 1e6;

// Brent root finder on [lo, hi] with f(lo) < 0 <= f(hi). Converges when the
// residual falls under f_tol or the bracket shrinks under x_tol.
template <typename F>
double brent_root(F f, double lo, double hi, double f_lo, double f_hi,
                  double x_tol, double f_tol) {
    double a = lo, b = hi, fa = f_lo, fb = f_hi;
    if (std::abs(fa) < std::abs(fb)) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = a, fc = fa, d = b - a;
    bool used_bisection = true;
    for (int iter = 0; iter < 200; ++iter) {
        if (std::abs(fb) <= f_tol) return b;
        double s;
        if (fa != fc && fb != fc) {
            s = a * fb * fc / ((fa - fb) * (fa - fc)) +
                b * fa * fc / ((fb - fa) * (fb - fc)) +
                c * fa * fb / ((fc - fa) * (fc - fb));
        } else {
            s = b - fb * (b - a) / (fb - fa);
        }
        const double mid = 0.5 * (a + b);
        const bool out_of_range = (s - mid) * (s - b) >= 0.0;
        const double step_prev = std::abs(b - c);
        if (out_of_range ||
            (used_bisection && std::abs(s - b) >= 0.5 * step_prev) ||
            (!used_bisection && std::abs(s - b) >= 0.5 * std::abs(d)) ||
            step_prev < x_tol) {
            s = mid;
            used_bisection = true;
        } else {
            used_bisection = false;
        }
        const double fs = f(s);
        d = c - b;
        c = b;
        fc = fb;
        if (fa * fs < 0.0) {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if (std::abs(fa) < std::abs(fb)) {
            std::swap(a, b);
            std::swap(fa, fb);
        }
        if (std::abs(a - b) <= x_tol) return b;
    }
    return b;
}

}  // namespace

Engine::Engine(const ModelSpec& spec)
    : spec_(spec), companions_(build_companion_set(spec)) {
    const auto& a_mat = companions_.A;
    Eigen::EigenSolver<linalg::Matrix> solver(a_mat);
    if (solver.info() != Eigen::Success) return;
    eigvals_ = solver.eigenvalues();
    eigvecs_ = solver.eigenvectors();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(eigvecs_);
    eigvecs_inv_ = lu.solve(Eigen::MatrixXcd::Identity(a_mat.rows(), a_mat.cols()));
    const double recon_err =
        (eigvecs_ * eigvals_.asDiagonal() * eigvecs_inv_ - a_mat.cast<std::complex<double>>())
            .cwiseAbs()
            .maxCoeff();
    const double scale = std::max(1.0, a_mat.cwiseAbs().maxCoeff());
    spectral_ok_ = recon_err <= 1e-12 * scale;
    bv_ = companions_.bfull.cast<std::complex<double>>().transpose() * eigvecs_;
}

linalg::Matrix Engine::propagator(double dt) const {
    if (spectral_ok_) {
        Eigen::VectorXcd ex = (eigvals_.array() * dt).exp();
        return (eigvecs_ * ex.asDiagonal() * eigvecs_inv_).real();
    }
    return linalg::matrix_exponential(companions_.A, dt);
}

linalg::Matrix Engine::propagator_integral(double dt) const {
    if (spectral_ok_) {
        Eigen::VectorXcd phi(eigvals_.size());
        for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
            const std::complex<double> lam = eigvals_(i);
            phi(i) = std::abs(lam) * std::abs(dt) < 1e-14
                         ? std::complex<double>(dt, 0.0)
                         : (std::exp(lam * dt) - 1.0) / lam;
        }
        return (eigvecs_ * phi.asDiagonal() * eigvecs_inv_).real();
    }
    return linalg::expm_integral(companions_.A, dt);
}

double Engine::weighted_integral(double dt, const linalg::Vector& x) const {
    if (spectral_ok_) {
        const Eigen::VectorXcd w = eigvecs_inv_ * x.cast<std::complex<double>>();
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
            const std::complex<double> lam = eigvals_(i);
            const std::complex<double> phi =
                std::abs(lam) * std::abs(dt) < 1e-14
                    ? std::complex<double>(dt, 0.0)
                    : (std::exp(lam * dt) - 1.0) / lam;
            acc += bv_(i) * phi * w(i);
        }
        return acc.real();
    }
    return companions_.bfull.dot(linalg::expm_integral(companions_.A, dt) * x);
}

double Engine::weighted_propagation(double dt, const linalg::Vector& x) const {
    if (spectral_ok_) {
        const Eigen::VectorXcd w = eigvecs_inv_ * x.cast<std::complex<double>>();
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
            acc += bv_(i) * std::exp(eigvals_(i) * dt) * w(i);
        }
        return acc.real();
    }
    return companions_.bfull.dot(linalg::matrix_exponential(companions_.A, dt) * x);
}

SimState initial_state(std::size_t p) {
    SimState state;
    state.S = linalg::Matrix::Zero(static_cast<Eigen::Index>(p),
                                   static_cast<Eigen::Index>(p));
    return state;
}

double next_arrival(const Engine& engine, const SimState& state, double u,
                    double root_tolerance) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("u must lie in (0, 1)");
    if (!(root_tolerance > 0.0))
        throw std::invalid_argument("root_tolerance must be positive");
    const double mu = engine.spec().mu;
    const double log_u = std::log(u);
    const linalg::Vector x = state.S * engine.companions().e;
    const auto compensator_gap = [&](double dt) {
        return mu * dt + engine.weighted_integral(dt, x) + log_u;
    };
    const double hi = -log_u / mu;
    const double f_hi = compensator_gap(hi);
    const double f_tol = 0.5 * root_tolerance;
    // mu * hi cancels log_u only up to rounding, so a zero excitation term
    // can leave f_hi a few ulps below zero; that is still a valid bracket end
    const double rounding =
        std::max(f_tol, 16.0 * std::numeric_limits<double>::epsilon() *
                            std::abs(log_u));
    if (f_hi < -rounding) {
        throw std::runtime_error(
            "next_arrival: compensator bracket failed; the excitation kernel "
            "appears negative or the state overflowed");
    }
    if (f_hi <= 0.0) return state.last_event + hi;
    const double dt =
        brent_root(compensator_gap, 0.0, hi, log_u, f_hi,
                   root_tolerance * std::max(1.0, hi) * 1e-4, f_tol);
    return state.last_event + dt;
}

void advance_state(const Engine& engine, SimState& state, double new_time) {
    if (state.count > 0 && !(new_time > state.last_event))
        throw std::invalid_argument("event times must be strictly increasing");
    if (state.count == 0 && !(new_time > 0.0))
        throw std::invalid_argument("first event time must be positive");
    const double dt = new_time - state.last_event;
    const Eigen::Index p = state.S.rows();
    state.S = engine.propagator(dt) * state.S + linalg::Matrix::Identity(p, p);
    state.last_event = new_time;
    state.count += 1;
}

SimResult simulate_path(const ModelSpec& spec, const SimConfig& config) {
    if (!config.horizon.has_value() && !config.max_events.has_value())
        throw std::invalid_argument("set horizon or max_events");
    if (config.horizon.has_value() && !(*config.horizon >= 0.0))
        throw std::invalid_argument("horizon must be nonnegative");

    Engine engine(spec);
    Rng rng(config.seed);
    SimState state = initial_state(spec.p());

    // reference rate for the runaway check; fall back to the baseline when
    // the stationary rate is unavailable
    double rate_star = spec.mu;
    try {
        rate_star = stationary_mean_increment(spec, 1.0);
    } catch (const std::exception&) {
    }

    SimResult result;
    for (;;) {
        if (config.max_events.has_value() && state.count >= *config.max_events)
            break;
        const double u = rng.uniform_open();
        const double t = next_arrival(engine, state, u, config.root_tolerance);
        if (config.horizon.has_value() && t >= *config.horizon) break;
        advance_state(engine, state, t);
        result.times.push_back(t);
        if (state.count >= 1024 &&
            static_cast<double>(state.count) >
                kRunawayFactor * rate_star * std::max(t, 1.0)) {
            throw std::runtime_error(
                "simulate_path: runaway path, event rate exceeds 1e6 times "
                "the stationary mean");
        }
    }
    result.horizon = config.horizon.has_value()
                         ? *config.horizon
                         : (result.times.empty() ? 0.0 : result.times.back());
    return result;
}

std::vector<double> intensity_path(const ModelSpec& spec,
                                   const std::vector<double>& times,
                                   const std::vector<double>& grid) {
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw std::invalid_argument("grid must be sorted");
    Engine engine(spec);
    const auto& c = engine.companions();
    const Eigen::Index p = c.A.rows();

    std::vector<double> out;
    out.reserve(grid.size());
    linalg::Vector x = linalg::Vector::Zero(p);
    double t_ref = 0.0;
    std::size_t next_event = 0;
    for (const double g : grid) {
        // absorb events strictly before g so the value is the left limit
        while (next_event < times.size() && times[next_event] < g) {
            const double te = times[next_event];
            x = engine.propagator(te - t_ref) * x + c.e;
            t_ref = te;
            ++next_event;
        }
        out.push_back(spec.mu + engine.weighted_propagation(g - t_ref, x));
    }
    return out;
}

}  // namespace carma_hawkes::simulate
