#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "carma_hawkes/model.hpp"

namespace carma_hawkes::inference {

struct BinnedCounts {
    double tau{1.0};
    std::vector<long> counts;
    double origin{0.0};
};

struct FitResult {
    ModelSpec spec;
    double objective{0.0};  // log-likelihood for MLE, squared ACF distance for MME
    bool converged{false};
    std::size_t iterations{0};
    ValidityReport validity;
    std::optional<std::vector<double>> stderrs;  // ordered mu, a_1..a_p, b_0..b_q
};

struct FitOptions {
    std::uint64_t seed{0};
    std::size_t starts{8};
    std::size_t max_iterations{4000};
    double tolerance{1e-9};
};

struct AcfSummary {
    double mean{0.0};
    double variance{0.0};
    std::vector<double> acf;  // lags 1..max_lag
};

struct AcfBand {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct KsReport {
    double statistic{0.0};
    double p_value{0.0};
    std::vector<double> residuals;
};

/// Exact log-likelihood over the window [0, T_k]:
/// L = -mu T_k - b'A^{-1}S(k)e + k b'A^{-1}e + sum_i ln lambda_{T_i},
/// with lambda taken as the left limit at each event. Returns -infinity
/// (not an exception) when any lambda_{T_i} <= 0.
double log_likelihood(const ModelSpec& spec, const std::vector<double>& events);

FitResult mle_fit(const std::vector<double>& events, int p, int q,
                  const std::optional<ModelSpec>& init = std::nullopt,
                  const FitOptions& options = {});

/// Two-step moment estimator: step 1 minimizes the squared distance between
/// the empirical and theoretical count autocorrelations over lags 1..m with
/// the baseline profiled from the sample mean; step 2 sets
/// mu = mean(counts) / ((1 - b'Atilde^{-1} e) tau) at the optimum.
FitResult mme_fit(const std::vector<double>& events, int p, int q, double tau,
                  int m, const FitOptions& options = {});

AcfSummary empirical_acf(const BinnedCounts& binned, int max_lag);

/// Symmetric normal confidence intervals around the empirical ACF. The
/// long-run covariance of the autocovariance statistics is estimated with a
/// Bartlett taper at bandwidth floor(4 (n/100)^{2/9}) unless overridden,
/// then mapped to autocorrelations by the delta method.
AcfBand acf_confidence(const BinnedCounts& binned, int max_lag, double level,
                       std::optional<int> bandwidth = std::nullopt);

/// Time-rescaling residuals r_i = Lambda(T_{i+1}) - Lambda(T_i) with a
/// Kolmogorov-Smirnov test against the unit exponential.
KsReport residual_ks(const ModelSpec& spec, const std::vector<double>& events);

BinnedCounts bin_events(const std::vector<double>& events, double tau,
                        double horizon);

/// Standard normal quantile (Acklam's rational approximation).
double normal_quantile(double prob);

}  // namespace carma_hawkes::inference
