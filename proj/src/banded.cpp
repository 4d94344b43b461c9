#include "arrival/banded.hpp"

#include <algorithm>
#include <complex>
#include <string>

#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "arrival/errors.hpp"

namespace arrival {

BandedMatrix::BandedMatrix(std::size_t n, std::size_t half_bandwidth)
    : n_(n), b_(half_bandwidth), ld_(3 * half_bandwidth + 1), ab_(ld_ * n) {
  if (n == 0) throw ConfigError("band matrix must be non-empty");
}

std::complex<double>& BandedMatrix::at(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_ || (i > j ? i - j : j - i) > b_) throw Error("band matrix index outside band");
  return ab_[index(i, j)];
}

std::complex<double> BandedMatrix::get(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_ || (i > j ? i - j : j - i) > b_) return {0.0, 0.0};
  return ab_[index(i, j)];
}

void BandedMatrix::multiply(const std::complex<double>* x, std::complex<double>* y) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > b_ ? i - b_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + b_);
    std::complex<double> s(0.0, 0.0);
    for (std::size_t j = lo; j <= hi; ++j) s += ab_[index(i, j)] * x[j];
    y[i] = s;
  }
}

void BandedMatrix::multiply_adjoint(const std::complex<double>* x, std::complex<double>* y) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > b_ ? i - b_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + b_);
    std::complex<double> s(0.0, 0.0);
    for (std::size_t j = lo; j <= hi; ++j) s += std::conj(ab_[index(j, i)]) * x[j];
    y[i] = s;
  }
}

BandedMatrix BandedMatrix::affine(std::complex<double> alpha, std::complex<double> beta) const {
  BandedMatrix out(n_, b_);
  for (std::size_t k = 0; k < ab_.size(); ++k) out.ab_[k] = alpha * ab_[k];
  for (std::size_t i = 0; i < n_; ++i) out.ab_[index(i, i)] += beta;
  return out;
}

BandedLU::BandedLU(BandedMatrix matrix) : lu_(std::move(matrix)), pivots_(lu_.n_) {
  const auto n = static_cast<lapack_int>(lu_.n_);
  const auto b = static_cast<lapack_int>(lu_.b_);
  const lapack_int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n, n, b, b, lu_.ab_.data(),
                                         static_cast<lapack_int>(lu_.ld_), pivots_.data());
  if (info != 0)
    throw NumericalError("banded LU factorization failed (zgbtrf info " + std::to_string(info) + ")");
  inverse_diagonal_.resize(lu_.n_);
  for (std::size_t j = 0; j < lu_.n_; ++j) inverse_diagonal_[j] = 1.0 / lu_.ab_[2 * lu_.b_ + j * lu_.ld_];
}

// Same algorithm as zgbtrs('N'), written out: per-column BLAS calls dominate
// the cost of the library routine for narrow bands.
void BandedLU::solve(std::complex<double>* rhs) const {
  const std::size_t n = lu_.n_;
  const std::size_t kl = lu_.b_;
  const std::size_t kd = 2 * lu_.b_;
  const std::size_t ld = lu_.ld_;
  const std::complex<double>* ab = lu_.ab_.data();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const std::size_t lm = std::min(kl, n - 1 - j);
    const auto l = static_cast<std::size_t>(pivots_[j] - 1);
    if (l != j) std::swap(rhs[l], rhs[j]);
    const std::complex<double> bj = rhs[j];
    const std::complex<double>* col = ab + kd + j * ld;
    for (std::size_t i = 1; i <= lm; ++i) rhs[j + i] -= bj * col[i];
  }
  for (std::size_t j = n; j-- > 0;) {
    const std::complex<double>* col = ab + j * ld;
    rhs[j] *= inverse_diagonal_[j];
    const std::complex<double> bj = rhs[j];
    const std::size_t i0 = j > kd ? j - kd : 0;
    for (std::size_t i = i0; i < j; ++i) rhs[i] -= bj * col[kd + i - j];
  }
}

}  // namespace arrival
