#include "carma_hawkes/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace carma_hawkes {

namespace {

constexpr double kDistinctGapTol = 1e-8;

bool effectively_real(const linalg::Complex& z, double radius) {
    return std::abs(z.imag()) <= 1e-9 * std::max(1.0, radius);
}

double spectral_radius(const Spectrum& s) {
    double r = 0.0;
    for (const auto& z : s) r = std::max(r, std::abs(z));
    return r;
}

/// Roots of c_0 + c_1 z + ... + c_n z^n, via the companion matrix of the
/// monic polynomial. Trailing zero coefficients are trimmed.
Spectrum polynomial_roots(std::vector<double> coeffs) {
    while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
    const int n = static_cast<int>(coeffs.size()) - 1;
    if (n < 1) return {};
    Matrix c = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) c(i + 1, i) = 1.0;
    for (int i = 0; i < n; ++i) c(i, n - 1) = -coeffs[i] / coeffs[n];
    return linalg::eigenvalues(c);
}

double kernel_value(const CompanionSet& c, double t) {
    return c.bfull.dot(linalg::matrix_exponential(c.A, t) * c.e);
}

KernelVerdict numeric_grid_verdict(const ModelSpec& spec, const CompanionSet& c,
                                   const Spectrum& eig_a) {
    const double rate = std::abs(linalg::max_real_part(eig_a));
    const double horizon = rate > 0.0 ? 40.0 / rate : 1e4;
    const double floor_t = horizon * 1e-6;
    const double tol = -1e-12 * std::max(1.0, c.bfull.norm());
    (void)spec;

    double h0 = kernel_value(c, 0.0);
    if (h0 < tol) {
        return {KernelVerdictKind::NumericallyNegative, "grid", 0.0};
    }
    const int n = 4096;
    const double log_lo = std::log(floor_t);
    const double log_hi = std::log(horizon);
    for (int i = 0; i < n; ++i) {
        const double t = std::exp(log_lo + (log_hi - log_lo) * i / (n - 1.0));
        if (kernel_value(c, t) < tol) {
            return {KernelVerdictKind::NumericallyNegative, "grid", t};
        }
    }
    return {KernelVerdictKind::NumericallyNonnegative, "grid", std::nullopt};
}

}  // namespace

void ModelSpec::validate() const {
    if (ar.empty()) throw std::invalid_argument("ModelSpec: p >= 1 required");
    if (ma.empty() || ma.size() > ar.size()) {
        throw std::invalid_argument("ModelSpec: 0 <= q < p required");
    }
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("ModelSpec: mu must be a positive finite real");
    }
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(ar.begin(), ar.end(), finite) ||
        !std::all_of(ma.begin(), ma.end(), finite)) {
        throw std::invalid_argument("ModelSpec: coefficients must be finite");
    }
}

CompanionSet build_companion_set(const ModelSpec& spec) {
    spec.validate();
    const int p = spec.p();
    const int m = p * (p + 1) / 2;

    CompanionSet c;
    c.A = Matrix::Zero(p, p);
    for (int i = 0; i + 1 < p; ++i) c.A(i, i + 1) = 1.0;
    for (int i = 0; i < p; ++i) c.A(p - 1, i) = -spec.ar[p - 1 - i];

    c.e = Vector::Zero(p);
    c.e(p - 1) = 1.0;
    c.bfull = Vector::Zero(p);
    for (std::size_t i = 0; i < spec.ma.size(); ++i) c.bfull(i) = spec.ma[i];

    c.Atilde = c.A + c.e * c.bfull.transpose();

    c.etilde = Vector::Zero(m);
    c.etilde(m - 1) = 1.0;

    // Row-block offsets of the vlt coordinates: block j (1-based) holds the
    // products X_j X_j .. X_p X_j and has p-j+1 entries.
    std::vector<int> offset(p + 1, 0);
    for (int j = 1; j < p; ++j) offset[j] = offset[j - 1] + (p - j + 1);
    auto idx = [&](int j, int i) { return offset[j - 1] + i - 1; };  // block j, local i
    auto ab = [&](int b_index, int a_index) {
        // b_{b_index} - a_{a_index}, both in the paper's subscripts.
        return c.bfull(b_index) - spec.ar[a_index - 1];
    };

    c.Atilde2 = Matrix::Zero(m, m);
    for (int j = 1; j <= p; ++j) {
        const int n = p - j + 1;
        if (j == p) {
            c.Atilde2(idx(j, 1), idx(j, 1)) = 2.0 * ab(p - 1, 1);
        } else {
            c.Atilde2(idx(j, 1), idx(j, 2)) = 2.0;
            for (int r = 2; r < n; ++r) c.Atilde2(idx(j, r), idx(j, r + 1)) = 1.0;
            for (int l = 1; l <= n; ++l) {
                c.Atilde2(idx(j, n), idx(j, l)) += ab(j + l - 2, p - j - l + 2);
            }
            for (int r = 2; r <= n; ++r) {
                c.Atilde2(idx(j, r), idx(j + 1, r - 1)) += 1.0;
            }
        }
        for (int i = 1; i < j; ++i) {
            const double scale = (j == p) ? 2.0 : 1.0;
            c.Atilde2(idx(j, n), idx(i, j - i + 1)) += scale * ab(i - 1, p - i + 1);
        }
    }

    // B satisfies (X X^T) b = B vlt(X X^T) row by row: entry (i,j) of the
    // symmetric matrix lives at vlt block min(i,j).
    c.Bmat = Matrix::Zero(p, m);
    for (int i = 1; i <= p; ++i) {
        for (int j = 1; j <= p; ++j) {
            const int col = (i >= j) ? idx(j, i - j + 1) : idx(i, j - i + 1);
            c.Bmat(i - 1, col) += c.bfull(j - 1);
        }
    }

    c.Ctilde = Matrix::Zero(m, p);
    for (int j = 1; j < p; ++j) {
        c.Ctilde(j * p - j * (j - 1) / 2 - 1, j - 1) = spec.mu;
    }
    for (int j = 1; j < p; ++j) c.Ctilde(m - 1, j - 1) = c.bfull(j - 1);
    c.Ctilde(m - 1, p - 1) = 2.0 * spec.mu + c.bfull(p - 1);

    return c;
}

Vector vlt(const Vector& h) {
    const int p = static_cast<int>(h.size());
    Vector out(p * (p + 1) / 2);
    int k = 0;
    for (int j = 0; j < p; ++j) {
        for (int i = j; i < p; ++i) out(k++) = h(i) * h(j);
    }
    return out;
}

Vector vlt_matrix(const Matrix& sym) {
    const int p = static_cast<int>(sym.rows());
    Vector out(p * (p + 1) / 2);
    int k = 0;
    for (int j = 0; j < p; ++j) {
        for (int i = j; i < p; ++i) out(k++) = sym(i, j);
    }
    return out;
}

KernelVerdict check_kernel_nonnegativity(const ModelSpec& spec) {
    spec.validate();
    const CompanionSet c = build_companion_set(spec);
    const Spectrum eig_a = linalg::eigenvalues(c.A);
    const double radius = spectral_radius(eig_a);
    const int p = spec.p();
    const int q = spec.q();

    const bool all_real = std::all_of(eig_a.begin(), eig_a.end(), [&](const auto& z) {
        return effectively_real(z, radius);
    });
    const bool all_neg_real_part = linalg::max_real_part(eig_a) < 0.0;

    // (b): CAR(p) with all eigenvalues real and negative.
    if (q == 0 && spec.ma[0] > 0.0 && all_real && all_neg_real_part) {
        return {KernelVerdictKind::ProvenNonnegative, "b", std::nullopt};
    }

    // (f): exact criterion for CARMA(2,1); decides both ways.
    if (p == 2 && q == 1) {
        const bool real_neg = all_real && all_neg_real_part;
        const double lam1 = eig_a[0].real();
        const bool ok = real_neg && spec.ma[1] >= 0.0 &&
                        spec.ma[0] + lam1 * spec.ma[1] >= 0.0;
        return {ok ? KernelVerdictKind::ProvenNonnegative
                   : KernelVerdictKind::ProvenNotNonnegative,
                "f", std::nullopt};
    }

    if (q == 0 && spec.ma[0] > 0.0 && all_neg_real_part) {
        // (c): every conjugate pair dominated by a distinct real eigenvalue.
        std::vector<double> reals;
        std::vector<double> pair_re;
        for (const auto& z : eig_a) {
            if (effectively_real(z, radius)) {
                reals.push_back(z.real());
            } else if (z.imag() > 0.0) {
                pair_re.push_back(z.real());
            }
        }
        std::sort(reals.rbegin(), reals.rend());
        std::sort(pair_re.rbegin(), pair_re.rend());
        if (!pair_re.empty() && pair_re.size() <= reals.size()) {
            bool matched = true;
            for (std::size_t i = 0; i < pair_re.size(); ++i) {
                if (reals[i] < pair_re[i]) {
                    matched = false;
                    break;
                }
            }
            if (matched) return {KernelVerdictKind::ProvenNonnegative, "c", std::nullopt};
        }
        // (d): necessary — the dominant eigenvalue must be real.
        if (!effectively_real(eig_a[0], radius)) {
            return {KernelVerdictKind::ProvenNotNonnegative, "d", std::nullopt};
        }
    }

    // (e): interlacing partial sums of sorted AR and MA roots, all real negative.
    if (q >= 1 && all_real && all_neg_real_part) {
        std::vector<double> ma_coeffs(spec.ma.begin(), spec.ma.end());
        const Spectrum ma_roots = polynomial_roots(ma_coeffs);
        const double ma_radius = spectral_radius(ma_roots);
        const bool ma_real_neg =
            static_cast<int>(ma_roots.size()) == q &&
            std::all_of(ma_roots.begin(), ma_roots.end(), [&](const auto& z) {
                return effectively_real(z, ma_radius) && z.real() < 0.0;
            });
        if (ma_real_neg) {
            std::vector<double> lam, gam;
            for (const auto& z : eig_a) lam.push_back(z.real());
            for (const auto& z : ma_roots) gam.push_back(z.real());
            std::sort(lam.rbegin(), lam.rend());
            std::sort(gam.rbegin(), gam.rend());
            bool ok = true;
            double sum_l = 0.0, sum_g = 0.0;
            for (int k = 0; k < q; ++k) {
                sum_l += lam[k];
                sum_g += gam[k];
                if (sum_g > sum_l) {
                    ok = false;
                    break;
                }
            }
            if (ok) return {KernelVerdictKind::ProvenNonnegative, "e", std::nullopt};
        }
    }

    return numeric_grid_verdict(spec, c, eig_a);
}

ValidityReport check_validity(const ModelSpec& spec) {
    spec.validate();
    const CompanionSet c = build_companion_set(spec);

    ValidityReport report;
    report.spectrum_A = linalg::eigenvalues(c.A);
    report.spectrum_Atilde = linalg::eigenvalues(c.Atilde);
    report.spectrum_Atilde2 = linalg::eigenvalues(c.Atilde2);
    report.kernel_verdict = check_kernel_nonnegativity(spec);

    const bool a_singular = spec.ar.back() == 0.0;
    if (a_singular) {
        report.branching_ratio = std::numeric_limits<double>::infinity();
        report.diagnostics.push_back(
            "a_p = 0: A is singular, the kernel integral diverges");
    } else {
        Eigen::PartialPivLU<Matrix> lu(c.A);
        report.branching_ratio = -c.bfull.dot(lu.solve(c.e));
    }

    const bool a_stable = linalg::max_real_part(report.spectrum_A) < 0.0;
    const bool distinct = linalg::min_relative_gap(report.spectrum_A) > kDistinctGapTol;
    if (!distinct) {
        report.diagnostics.push_back("eigenvalues of A are not numerically distinct");
    }
    report.stationary = a_stable && distinct && !a_singular &&
                        report.branching_ratio < 1.0 &&
                        report.kernel_verdict.nonnegative();
    report.moments_exist =
        linalg::max_real_part(report.spectrum_Atilde) < 0.0 &&
        linalg::min_relative_gap(report.spectrum_Atilde) > kDistinctGapTol;
    report.acf_exists = report.moments_exist &&
                        linalg::max_real_part(report.spectrum_Atilde2) < 0.0;
    return report;
}

PerturbationBound perturbation_sufficient_bound(const ModelSpec& spec, int norm_order) {
    spec.validate();
    if (norm_order < 1) {
        throw std::invalid_argument("perturbation_sufficient_bound: norm_order >= 1");
    }
    const CompanionSet c = build_companion_set(spec);
    const Spectrum eig_a = linalg::eigenvalues(c.A);
    if (linalg::min_relative_gap(eig_a) <= kDistinctGapTol) {
        throw std::invalid_argument(
            "perturbation_sufficient_bound: A defective (repeated eigenvalues)");
    }
    const int p = spec.p();
    Eigen::MatrixXcd s(p, p);
    for (int j = 0; j < p; ++j) {
        linalg::Complex pw = 1.0;
        for (int i = 0; i < p; ++i) {
            s(i, j) = pw;
            pw *= eig_a[j];
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(p - 1);

    PerturbationBound out;
    out.lhs = (smax / smin) * c.bfull.norm();
    out.rhs = std::abs(eig_a[0].real());
    out.holds = out.lhs < out.rhs;
    return out;
}

}  // namespace carma_hawkes
