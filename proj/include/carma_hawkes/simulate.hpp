#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "carma_hawkes/linalg.hpp"
#include "carma_hawkes/model.hpp"
#include "carma_hawkes/rng.hpp"

namespace carma_hawkes::simulate {

/// Precomputed propagation machinery for one model. Holds an eigen
/// decomposition of the companion matrix when it is well conditioned so
/// repeated evaluations of exp(A dt) and the compensator integral reduce to
/// a diagonal scaling. Falls back to dense matrix exponentials when the
/// eigenvector basis is nearly defective.
class Engine {
  public:
    explicit Engine(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }
    const CompanionSet& companions() const { return companions_; }

    /// exp(A * dt).
    linalg::Matrix propagator(double dt) const;

    /// integral_0^dt exp(A s) ds, equal to A^{-1}(exp(A dt) - I) when A is
    /// invertible. Used by the compensator and the likelihood.
    linalg::Matrix propagator_integral(double dt) const;

    /// b' * integral_0^dt exp(A s) ds * x for a state vector x.
    double weighted_integral(double dt, const linalg::Vector& x) const;

    /// b' * exp(A dt) * x.
    double weighted_propagation(double dt, const linalg::Vector& x) const;

    bool using_spectral_path() const { return spectral_ok_; }

    // diagonalized coordinates for O(p)-per-step recursions; only valid
    // when using_spectral_path() is true
    const Eigen::VectorXcd& eigenvalues_c() const { return eigvals_; }
    const Eigen::RowVectorXcd& b_spectral() const { return bv_; }
    Eigen::VectorXcd to_spectral(const linalg::Vector& x) const {
        return eigvecs_inv_ * x.cast<std::complex<double>>();
    }

  private:
    ModelSpec spec_;
    CompanionSet companions_;
    bool spectral_ok_ = false;
    Eigen::MatrixXcd eigvecs_;
    Eigen::MatrixXcd eigvecs_inv_;
    Eigen::VectorXcd eigvals_;
    Eigen::RowVectorXcd bv_;  // b' V
};

struct SimConfig {
    std::optional<double> horizon;  // simulate until t >= horizon
    std::optional<std::size_t> max_events;
    std::uint64_t seed = 0;
    double root_tolerance = 1e-10;
};

struct SimResult {
    std::vector<double> times;
    double horizon = 0.0;  // end of the observation window actually used
};

/// Running state for sequential generation: after k events,
/// S = sum_i exp(A(T_k - T_i)), so the post-event state vector is S e.
struct SimState {
    linalg::Matrix S;
    double last_event = 0.0;
    std::size_t count = 0;
};

SimState initial_state(std::size_t p);

/// Solves the unit exponential compensator equation
/// F(t) = mu (t - T_k) + b' S(k) A^{-1}[exp(A(t - T_k)) - I] e + ln(u) = 0
/// for the next arrival time. F is increasing with slope >= mu when the
/// kernel is non-negative, so the root lies in [T_k, T_k - ln(u)/mu].
double next_arrival(const Engine& engine, const SimState& state, double u,
                    double root_tolerance);

/// Fold an arrival at new_time into the state: S <- exp(A dt) S + I.
void advance_state(const Engine& engine, SimState& state, double new_time);

SimResult simulate_path(const ModelSpec& spec, const SimConfig& config);

/// lambda(t) = mu + b' sum_{T_i <= t} exp(A(t - T_i)) e at each grid point.
/// Left continuous at event times: an event at t contributes only for t' > t.
std::vector<double> intensity_path(const ModelSpec& spec,
                                   const std::vector<double>& times,
                                   const std::vector<double>& grid);

}  // namespace carma_hawkes::simulate
