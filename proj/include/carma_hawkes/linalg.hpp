#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace carma_hawkes::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Eigenvalues sorted by real part descending, ties broken by imaginary
/// part descending. The spectrum of a real matrix, so complex values come
/// in conjugate pairs.
using Spectrum = std::vector<Complex>;

/// e^{M t} via scaling-and-squaring with Pade approximation.
Matrix matrix_exponential(const Matrix& m, double t);

/// \int_0^t e^{M s} ds. Correct for singular M: computed from the
/// exponential of the augmented block [[M, I], [0, 0]], never via M^{-1}.
Matrix expm_integral(const Matrix& m, double t);

/// \int_0^t e^{H11 (t-u)} H12 e^{H22 u} du, read off the off-diagonal
/// block of exp([[H11, H12], [0, H22]] t).
Matrix coupled_block_integral(const Matrix& h11, const Matrix& h12,
                              const Matrix& h22, double t);

Spectrum eigenvalues(const Matrix& m);

/// Largest real part over the spectrum.
double max_real_part(const Spectrum& spectrum);

/// Smallest pairwise gap relative to the spectral radius; used to enforce
/// the distinct-eigenvalue hypotheses.
double min_relative_gap(const Spectrum& spectrum);

}  // namespace carma_hawkes::linalg
