#include "carma_hawkes/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carma_hawkes::linalg {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
    }
}

}  // namespace

Matrix matrix_exponential(const Matrix& m, double t) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw std::invalid_argument("matrix_exponential: matrix must be square");
    }
    require_finite(m, "matrix_exponential");
    if (!std::isfinite(t)) {
        throw std::invalid_argument("matrix_exponential: t must be finite");
    }
    return (m * t).exp();
}

Matrix expm_integral(const Matrix& m, double t) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw std::invalid_argument("expm_integral: matrix must be square");
    }
    require_finite(m, "expm_integral");
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("expm_integral: t must be a nonnegative finite real");
    }
    const Eigen::Index n = m.rows();
    Matrix aug = Matrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = m;
    aug.topRightCorner(n, n) = Matrix::Identity(n, n);
    return matrix_exponential(aug, t).topRightCorner(n, n);
}

Matrix coupled_block_integral(const Matrix& h11, const Matrix& h12,
                              const Matrix& h22, double t) {
    const Eigen::Index d1 = h11.rows();
    const Eigen::Index d2 = h22.rows();
    if (h11.cols() != d1 || h22.cols() != d2 || h12.rows() != d1 || h12.cols() != d2) {
        throw std::invalid_argument("coupled_block_integral: non-conformable blocks");
    }
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("coupled_block_integral: t must be a nonnegative finite real");
    }
    Matrix aug = Matrix::Zero(d1 + d2, d1 + d2);
    aug.topLeftCorner(d1, d1) = h11;
    aug.topRightCorner(d1, d2) = h12;
    aug.bottomRightCorner(d2, d2) = h22;
    return matrix_exponential(aug, t).topRightCorner(d1, d2);
}

Spectrum eigenvalues(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw std::invalid_argument("eigenvalues: matrix must be square");
    }
    require_finite(m, "eigenvalues");
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        std::ostringstream oss;
        oss << "eigenvalues: iteration failed to converge for matrix\n" << m;
        throw std::runtime_error(oss.str());
    }
    Spectrum out(solver.eigenvalues().data(),
                 solver.eigenvalues().data() + solver.eigenvalues().size());
    std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

double max_real_part(const Spectrum& spectrum) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Complex& z : spectrum) best = std::max(best, z.real());
    return best;
}

double min_relative_gap(const Spectrum& spectrum) {
    double radius = 0.0;
    for (const Complex& z : spectrum) radius = std::max(radius, std::abs(z));
    if (radius == 0.0) radius = 1.0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        for (std::size_t j = i + 1; j < spectrum.size(); ++j) {
            gap = std::min(gap, std::abs(spectrum[i] - spectrum[j]));
        }
    }
    return gap / radius;
}

}  // namespace carma_hawkes::linalg
