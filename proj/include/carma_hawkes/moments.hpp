#pragma once

#include "carma_hawkes/model.hpp"

#include <vector>

namespace carma_hawkes {

/// Kernel h(t) = b^T e^{A t} e.
double kernel_h(const ModelSpec& spec, double t);

struct KernelTail {
    double coefficient;  // b(lambda_1) / a'(lambda_1)
    double rate;         // lambda_1, the dominant (real) eigenvalue of A
};

/// Leading spectral term of the kernel; requires a real dominant eigenvalue.
KernelTail kernel_tail(const ModelSpec& spec);

/// E[X_{t+dt} | X_t = x0].
Vector conditional_mean_state(const ModelSpec& spec, const Vector& x0, double dt);

/// E[N_{t+dt} | N_t = n0, X_t = x0].
double conditional_mean_counts(const ModelSpec& spec, const Vector& x0, double n0,
                               double dt);

/// E[N_{T+tau} - N_T | X_{t0} = x0] with T - t0 = t_gap.
double expected_increment(const ModelSpec& spec, const Vector& x0, double t_gap,
                          double tau);

/// Long-run mean of the number of events in a bin of width tau:
/// mu (1 - b^T Atilde^{-1} e) tau.
double stationary_mean_increment(const ModelSpec& spec, double tau);

/// Long-run covariance Cov(tau, delta) of counts in two bins of width tau
/// separated by a gap delta.
double longrun_cov(const ModelSpec& spec, double tau, double delta);

/// Long-run variance Var(tau) of binned counts.
double longrun_var(const ModelSpec& spec, double tau);

/// rho_tau(d) = Cov(tau, d-1) / Var(tau) for d = 1..max_lag. The lag
/// spacing is d-1 time units regardless of tau; use longrun_cov directly
/// for bin-aligned gaps when tau != 1.
std::vector<double> theoretical_acf(const ModelSpec& spec, double tau, int max_lag);

struct HawkesMoments {
    double mean;
    double var;
    double cov;
    double acf;
};

/// Closed forms for the classical exponential-kernel Hawkes process with
/// baseline mu, jump size alpha and decay beta; the CAR(1) special case
/// oracle. Requires beta > alpha >= 0.
HawkesMoments hawkes_oracle(double mu, double alpha, double beta, double tau,
                            double delta);

}  // namespace carma_hawkes
