#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace arrival {

// Nodes and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule with n points (cached per n, thread safe).
const QuadratureRule& gauss_legendre(unsigned n);

struct AdaptiveResult {
  std::complex<double> value;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

struct AdaptiveOptions {
  double abs_tol = 0.0;
  double rel_tol = 1e-12;
  std::size_t max_evaluations = 2'000'000;
};

// Globally adaptive Gauss-Kronrod 7/15. The integration range is
// [breakpoints.front(), breakpoints.back()]; interior breakpoints seed the
// initial subdivision.
AdaptiveResult integrate_adaptive(const std::function<std::complex<double>(double)>& f,
                                  const std::vector<double>& breakpoints,
                                  const AdaptiveOptions& options = {});

AdaptiveResult integrate_adaptive_real(const std::function<double(double)>& f,
                                       const std::vector<double>& breakpoints,
                                       const AdaptiveOptions& options = {});

}  // namespace arrival
