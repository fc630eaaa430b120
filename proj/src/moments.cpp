#include "carma_hawkes/moments.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace carma_hawkes {

namespace {

struct MomentWork {
    CompanionSet c;
    Eigen::PartialPivLU<Matrix> lu_atilde;
    Eigen::PartialPivLU<Matrix> lu_atilde2;

    explicit MomentWork(const ModelSpec& spec)
        : c(build_companion_set(spec)),
          lu_atilde(c.Atilde),
          lu_atilde2(c.Atilde2) {
        const double eps = Eigen::NumTraits<double>::epsilon();
        if (lu_atilde.rcond() < eps || !lu_atilde.matrixLU().allFinite()) {
            throw std::invalid_argument("model: Atilde is numerically singular");
        }
    }

    Vector atilde_inv(const Vector& v) const { return lu_atilde.solve(v); }
    Matrix atilde_inv(const Matrix& v) const { return lu_atilde.solve(v); }
};

linalg::Complex eval_poly(const std::vector<double>& monic_tail,
                          linalg::Complex z) {
    // z^n + c_1 z^{n-1} + ... + c_n with monic_tail = [c_1..c_n]
    linalg::Complex acc = 1.0;
    for (double c : monic_tail) acc = acc * z + c;
    return acc;
}

}  // namespace

double kernel_h(const ModelSpec& spec, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("kernel_h: t >= 0 required");
    const CompanionSet c = build_companion_set(spec);
    return c.bfull.dot(linalg::matrix_exponential(c.A, t) * c.e);
}

KernelTail kernel_tail(const ModelSpec& spec) {
    const CompanionSet c = build_companion_set(spec);
    const Spectrum eig = linalg::eigenvalues(c.A);
    const linalg::Complex lam1 = eig[0];
    double radius = 0.0;
    for (const auto& z : eig) radius = std::max(radius, std::abs(z));
    if (std::abs(lam1.imag()) > 1e-9 * std::max(1.0, radius)) {
        throw std::invalid_argument(
            "kernel_tail: dominant eigenvalue is complex (oscillating tail)");
    }
    if (linalg::min_relative_gap(eig) <= 1e-8) {
        throw std::invalid_argument("kernel_tail: eigenvalues not distinct");
    }
    // b(z) and a'(z) at the dominant eigenvalue.
    linalg::Complex bz = 0.0;
    linalg::Complex pw = 1.0;
    for (double b : spec.ma) {
        bz += b * pw;
        pw *= lam1;
    }
    const int p = spec.p();
    std::vector<double> da(p);  // a'(z) = p z^{p-1} + ... , made monic below
    for (int k = 1; k < p; ++k) da[k - 1] = spec.ar[k - 1] * (p - k) / double(p);
    da.resize(p - 1);
    const linalg::Complex az = double(p) * eval_poly(da, lam1);
    return {(bz / az).real(), lam1.real()};
}

Vector conditional_mean_state(const ModelSpec& spec, const Vector& x0, double dt) {
    if (!(dt >= 0.0)) throw std::invalid_argument("conditional_mean_state: dt >= 0");
    MomentWork w(spec);
    if (x0.size() != spec.p()) {
        throw std::invalid_argument("conditional_mean_state: x0 has wrong length");
    }
    const Vector drift = w.atilde_inv(w.c.e) * spec.mu;
    return linalg::matrix_exponential(w.c.Atilde, dt) * (x0 + drift) - drift;
}

double conditional_mean_counts(const ModelSpec& spec, const Vector& x0, double n0,
                               double dt) {
    if (!(dt >= 0.0)) throw std::invalid_argument("conditional_mean_counts: dt >= 0");
    MomentWork w(spec);
    if (x0.size() != spec.p()) {
        throw std::invalid_argument("conditional_mean_counts: x0 has wrong length");
    }
    const Vector drift = w.atilde_inv(w.c.e) * spec.mu;
    const double s = w.c.bfull.dot(w.atilde_inv(w.c.e));
    const Matrix em = linalg::matrix_exponential(w.c.Atilde, dt);
    return n0 + spec.mu * (1.0 - s) * dt +
           w.c.bfull.dot(w.atilde_inv((em * (x0 + drift) - (x0 + drift)).eval()));
}

double expected_increment(const ModelSpec& spec, const Vector& x0, double t_gap,
                          double tau) {
    if (!(t_gap >= 0.0) || !(tau > 0.0)) {
        throw std::invalid_argument("expected_increment: t_gap >= 0, tau > 0");
    }
    MomentWork w(spec);
    if (x0.size() != spec.p()) {
        throw std::invalid_argument("expected_increment: x0 has wrong length");
    }
    const int p = spec.p();
    const Vector drift = w.atilde_inv(w.c.e) * spec.mu;
    const double s = w.c.bfull.dot(w.atilde_inv(w.c.e));
    const Matrix egap = linalg::matrix_exponential(w.c.Atilde, t_gap);
    const Matrix etau =
        linalg::matrix_exponential(w.c.Atilde, tau) - Matrix::Identity(p, p);
    return spec.mu * (1.0 - s) * tau +
           w.c.bfull.dot(w.atilde_inv((egap * etau * (x0 + drift)).eval()));
}

double stationary_mean_increment(const ModelSpec& spec, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("stationary_mean_increment: tau > 0");
    MomentWork w(spec);
    const double s = w.c.bfull.dot(w.atilde_inv(w.c.e));
    return spec.mu * (1.0 - s) * tau;
}

namespace {

void require_acf_exists(const ModelSpec& spec, const MomentWork& w) {
    if (linalg::max_real_part(linalg::eigenvalues(w.c.Atilde)) >= 0.0 ||
        linalg::max_real_part(linalg::eigenvalues(w.c.Atilde2)) >= 0.0) {
        (void)spec;
        throw std::invalid_argument(
            "model: Atilde or Atilde2 unstable, the long-run ACF does not exist");
    }
}

/// g_inf(tau) of the long-run covariance.
Vector g_infinity(const ModelSpec& spec, const MomentWork& w, double tau) {
    const int p = spec.p();
    const double mu = spec.mu;
    const Vector ai_e = w.atilde_inv(w.c.e);
    const double s = w.c.bfull.dot(ai_e);
    const Vector core = w.c.e * s - w.c.e + ai_e * (mu * s) +
                        w.c.Bmat * w.lu_atilde2.solve(
                            (w.c.etilde - w.c.Ctilde * ai_e).eval());
    const Matrix etau = linalg::matrix_exponential(w.c.Atilde, tau);
    return (Matrix::Identity(p, p) - etau) * w.atilde_inv(core) * mu;
}

double longrun_var_impl(const ModelSpec& spec, const MomentWork& w, double tau) {
    const int p = spec.p();
    const double mu = spec.mu;
    const Vector ai_e = w.atilde_inv(w.c.e);
    const double s = w.c.bfull.dot(ai_e);
    const Vector ai2_e = w.atilde_inv(ai_e);
    const Vector mixed =
        w.lu_atilde2.solve((w.c.etilde - w.c.Ctilde * ai_e).eval());
    const Vector h_inf = -ai_e * (mu * (1.0 - s)) + ai2_e * (mu * mu * s) +
                         w.atilde_inv((w.c.Bmat * mixed).eval()) * mu;
    const Matrix etau =
        linalg::matrix_exponential(w.c.Atilde, tau) - Matrix::Identity(p, p);
    return (1.0 - s) * (1.0 - 2.0 * s) * mu * tau +
           2.0 * w.c.bfull.dot(ai2_e) * tau * mu * mu * s +
           2.0 * w.c.bfull.dot(w.atilde_inv((w.c.Bmat * mixed).eval())) * mu * tau -
           2.0 * w.c.bfull.dot(w.atilde_inv((etau * h_inf).eval()));
}

}  // namespace

double longrun_cov(const ModelSpec& spec, double tau, double delta) {
    if (!(tau > 0.0) || !(delta >= 0.0)) {
        throw std::invalid_argument("longrun_cov: tau > 0 and delta >= 0 required");
    }
    MomentWork w(spec);
    require_acf_exists(spec, w);
    const int p = spec.p();
    const Matrix etau =
        linalg::matrix_exponential(w.c.Atilde, tau) - Matrix::Identity(p, p);
    const Matrix edelta = linalg::matrix_exponential(w.c.Atilde, delta);
    return w.c.bfull.dot(
        w.atilde_inv((etau * edelta * g_infinity(spec, w, tau)).eval()));
}

double longrun_var(const ModelSpec& spec, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("longrun_var: tau > 0 required");
    MomentWork w(spec);
    require_acf_exists(spec, w);
    return longrun_var_impl(spec, w, tau);
}

std::vector<double> theoretical_acf(const ModelSpec& spec, double tau, int max_lag) {
    if (!(tau > 0.0) || max_lag < 1) {
        throw std::invalid_argument("theoretical_acf: tau > 0, max_lag >= 1");
    }
    MomentWork w(spec);
    require_acf_exists(spec, w);
    const int p = spec.p();
    const double var = longrun_var_impl(spec, w, tau);
    const Matrix etau =
        linalg::matrix_exponential(w.c.Atilde, tau) - Matrix::Identity(p, p);
    const Vector g = g_infinity(spec, w, tau);
    const Matrix step = linalg::matrix_exponential(w.c.Atilde, 1.0);
    const Vector row = w.lu_atilde.transpose().solve(w.c.bfull);

    std::vector<double> acf(max_lag);
    Matrix edelta = Matrix::Identity(p, p);  // e^{Atilde (d-1)}
    for (int d = 1; d <= max_lag; ++d) {
        acf[d - 1] = row.dot(etau * edelta * g) / var;
        edelta = step * edelta;
    }
    return acf;
}

HawkesMoments hawkes_oracle(double mu, double alpha, double beta, double tau,
                            double delta) {
    if (!(mu > 0.0) || !(alpha >= 0.0) || !(beta > alpha)) {
        throw std::invalid_argument("hawkes_oracle: need mu > 0, beta > alpha >= 0");
    }
    if (!(tau > 0.0) || !(delta >= 0.0)) {
        throw std::invalid_argument("hawkes_oracle: tau > 0, delta >= 0");
    }
    const double k = 1.0 / (1.0 - alpha / beta);
    const double rate = beta - alpha;
    HawkesMoments out;
    out.mean = mu * k * tau;
    out.var = mu * k *
              (tau * k * k + (1.0 - k * k) * (1.0 - std::exp(-tau * rate)) / rate);
    out.cov = mu * beta * alpha * (2.0 * beta - alpha) *
              std::pow(std::expm1(-rate * tau), 2) /
              (2.0 * std::pow(rate, 4)) * std::exp(-rate * delta);
    out.acf = std::exp(-2.0 * beta * tau) *
              std::pow(std::exp(alpha * tau) - std::exp(beta * tau), 2) * alpha *
              (alpha - 2.0 * beta) /
              (2.0 * (alpha * (alpha - 2.0 * beta) * std::expm1(-rate * tau) +
                      beta * beta * tau * (alpha - beta))) *
              std::exp(-rate * delta);
    return out;
}

}  // namespace carma_hawkes
