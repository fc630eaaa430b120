#pragma once

#include "carma_hawkes/linalg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace carma_hawkes {

using linalg::Matrix;
using linalg::Spectrum;
using linalg::Vector;

/// One CARMA(p,q) intensity model: baseline rate mu, autoregressive
/// coefficients a_1..a_p and moving-average coefficients b_0..b_q with
/// 0 <= q < p.
struct ModelSpec {
    double mu{0.0};
    std::vector<double> ar;
    std::vector<double> ma;

    [[nodiscard]] int p() const { return static_cast<int>(ar.size()); }
    [[nodiscard]] int q() const { return static_cast<int>(ma.size()) - 1; }

    /// Throws std::invalid_argument when the invariants (p >= 1,
    /// 0 <= q < p, mu > 0, finite entries) are violated.
    void validate() const;
};

/// Every derived matrix/vector the closed forms need, built once per spec.
struct CompanionSet {
    Matrix A;        // p x p companion matrix of the AR polynomial
    Matrix Atilde;   // A + e b^T
    Matrix Atilde2;  // m x m second-moment matrix, m = p(p+1)/2
    Matrix Bmat;     // p x m
    Matrix Ctilde;   // m x p
    Vector e;        // unit-last, length p
    Vector etilde;   // unit-last, length m
    Vector bfull;    // [b_0,...,b_q,0,...,0], length p
};

CompanionSet build_companion_set(const ModelSpec& spec);

/// Lower-triangle vectorization of the rank-1 product h h^T:
/// [h1 h1,...,hp h1, h2 h2,...,hp h2, ..., hp hp].
Vector vlt(const Vector& h);

/// Lower-triangle vectorization of a symmetric p x p matrix, stacked in
/// the same block order as vlt(h).
Vector vlt_matrix(const Matrix& sym);

enum class KernelVerdictKind {
    ProvenNonnegative,
    ProvenNotNonnegative,
    NumericallyNonnegative,
    NumericallyNegative,
};

struct KernelVerdict {
    KernelVerdictKind kind;
    std::string rule;  // "b".."f" for the decidable rules, "grid" otherwise
    std::optional<double> first_violation_t;

    [[nodiscard]] bool nonnegative() const {
        return kind == KernelVerdictKind::ProvenNonnegative ||
               kind == KernelVerdictKind::NumericallyNonnegative;
    }
};

struct ValidityReport {
    double branching_ratio{0.0};  // -b^T A^{-1} e
    Spectrum spectrum_A;
    Spectrum spectrum_Atilde;
    Spectrum spectrum_Atilde2;
    KernelVerdict kernel_verdict;
    bool stationary{false};
    bool moments_exist{false};  // all Re eig(Atilde) < 0
    bool acf_exists{false};     // moments_exist and all Re eig(Atilde2) < 0
    std::vector<std::string> diagnostics;
};

/// Applies the decidable sufficient rules for kernel non-negativity in the
/// order b, f, c, d, e; falls back to evaluation of h(t) on a log-spaced
/// grid of 4096 points over [0, 40/|Re lambda_1|].
KernelVerdict check_kernel_nonnegativity(const ModelSpec& spec);

ValidityReport check_validity(const ModelSpec& spec);

struct PerturbationBound {
    double lhs{0.0};  // cond_2(S) * ||b||_2
    double rhs{0.0};  // |Re lambda_1(A)|
    bool holds{false};
};

/// Bauer-Fike style sufficient bound for the stability of Atilde = A + e b^T.
/// Sufficient only: when it fails, the direct spectrum of Atilde is
/// authoritative. As printed the bound compares against Re(lambda_1), which
/// is negative for any stable A; the comparison here uses |Re(lambda_1)|.
PerturbationBound perturbation_sufficient_bound(const ModelSpec& spec,
                                                int norm_order = 2);

}  // namespace carma_hawkes
