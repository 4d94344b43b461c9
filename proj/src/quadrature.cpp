#include "arrival/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "arrival/errors.hpp"

namespace arrival {

const QuadratureRule& gauss_legendre(unsigned n) {
  static std::mutex mutex;
  static std::map<unsigned, QuadratureRule> cache;
  if (n == 0) throw ConfigError("Gauss-Legendre rule needs n >= 1");
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // legendre_p_zeros returns the non-negative roots in increasing order.
  const std::vector<double> half = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  QuadratureRule rule;
  auto weight = [n](double x) {
    const double p = boost::math::legendre_p_prime<double>(static_cast<int>(n), x);
    return 2.0 / ((1.0 - x * x) * p * p);
  };
  for (auto r = half.rbegin(); r != half.rend(); ++r) {
    if (*r == 0.0) continue;
    rule.nodes.push_back(-*r);
    rule.weights.push_back(weight(*r));
  }
  for (double r : half) {
    rule.nodes.push_back(r);
    rule.weights.push_back(weight(r));
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
using Gauss7 = boost::math::quadrature::gauss<double, 7>;

struct Segment {
  double a;
  double b;
  std::complex<double> value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment gk15(const std::function<std::complex<double>(double)>& f, double a, double b) {
  // Kronrod abscissae: index 0 is the centre, odd indices are Gauss-7 nodes.
  const auto& xk = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss7::weights();
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const std::complex<double> fc = f(c);
  std::complex<double> kron = wk[0] * fc;
  std::complex<double> gauss = wg[0] * fc;
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const std::complex<double> pair = f(c - h * xk[i]) + f(c + h * xk[i]);
    kron += wk[i] * pair;
    if (i % 2 == 0) gauss += wg[i / 2] * pair;
  }
  kron *= h;
  gauss *= h;
  return Segment{a, b, kron, std::abs(kron - gauss)};
}

}  // namespace

AdaptiveResult integrate_adaptive(const std::function<std::complex<double>(double)>& f,
                                  const std::vector<double>& breakpoints,
                                  const AdaptiveOptions& options) {
  if (breakpoints.size() < 2) throw ConfigError("adaptive quadrature needs at least 2 breakpoints");
  std::priority_queue<Segment> heap;
  AdaptiveResult result;
  std::complex<double> total(0.0, 0.0);
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i]))
      throw ConfigError("adaptive quadrature breakpoints must be strictly increasing");
    Segment s = gk15(f, breakpoints[i], breakpoints[i + 1]);
    result.evaluations += 15;
    total += s.value;
    error += s.error;
    heap.push(s);
  }
  auto tolerance = [&] { return std::max(options.abs_tol, options.rel_tol * std::abs(total)); };
  while (error > tolerance() && result.evaluations < options.max_evaluations) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    Segment left = gk15(f, worst.a, mid);
    Segment right = gk15(f, mid, worst.b);
    result.evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed accumulated update rounding.
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  result.value = total;
  result.error = error;
  result.converged = error <= tolerance() && std::isfinite(std::abs(total));
  return result;
}

AdaptiveResult integrate_adaptive_real(const std::function<double(double)>& f,
                                       const std::vector<double>& breakpoints,
                                       const AdaptiveOptions& options) {
  return integrate_adaptive([&f](double x) { return std::complex<double>(f(x), 0.0); },
                            breakpoints, options);
}

}  // namespace arrival
