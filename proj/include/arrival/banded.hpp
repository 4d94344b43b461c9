#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace arrival {

// Square complex band matrix with equal lower and upper half-bandwidth,
// stored in LAPACK band layout with room for the LU fill-in.
class BandedMatrix {
 public:
  BandedMatrix(std::size_t n, std::size_t half_bandwidth);

  std::size_t size() const { return n_; }
  std::size_t half_bandwidth() const { return b_; }

  std::complex<double>& at(std::size_t i, std::size_t j);
  std::complex<double> get(std::size_t i, std::size_t j) const;

  // y = A x
  void multiply(const std::complex<double>* x, std::complex<double>* y) const;
  // y = A^H x
  void multiply_adjoint(const std::complex<double>* x, std::complex<double>* y) const;

  // alpha * A + beta * I
  BandedMatrix affine(std::complex<double> alpha, std::complex<double> beta) const;

 private:
  friend class BandedLU;
  std::size_t index(std::size_t i, std::size_t j) const { return (2 * b_ + i - j) + j * ld_; }
  std::size_t n_;
  std::size_t b_;
  std::size_t ld_;
  std::vector<std::complex<double>> ab_;
};

// LU factorization with partial pivoting (LAPACK zgbtrf) and the matching band solve.
class BandedLU {
 public:
  explicit BandedLU(BandedMatrix matrix);
  void solve(std::complex<double>* rhs) const;

 private:
  BandedMatrix lu_;
  std::vector<int> pivots_;
  std::vector<std::complex<double>> inverse_diagonal_;
};

}  // namespace arrival
