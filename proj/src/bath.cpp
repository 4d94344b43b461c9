#include "arrival/bath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "arrival/errors.hpp"
#include "arrival/quadrature.hpp"

namespace arrival {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

cdouble neville_at_zero(const std::vector<double>& x, std::vector<cdouble> p) {
  for (std::size_t m = 1; m < p.size(); ++m)
    for (std::size_t i = 0; i + m < p.size(); ++i)
      p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
  return p[0];
}

// Polynomial extrapolation of y(x_j) to x = 0; the error estimate compares with
// the next lower order built from the finest points.
std::pair<cdouble, double> extrapolate_to_zero(const std::vector<double>& x,
                                               const std::vector<cdouble>& y) {
  const cdouble best = neville_at_zero(x, y);
  const std::vector<double> xf(x.begin() + 1, x.end());
  const std::vector<cdouble> yf(y.begin() + 1, y.end());
  return {best, std::abs(best - neville_at_zero(xf, yf))};
}

double relative_difference(double a, double b, double scale) {
  return std::abs(a - b) / std::max(std::abs(b), scale);
}

}  // namespace

Dispersion Dispersion::constant(double c0) {
  if (!(std::isfinite(c0) && c0 > 0.0)) throw ConfigError("bath.c0: must be finite and > 0");
  Dispersion d;
  d.constant_ = c0;
  return d;
}

Dispersion Dispersion::profile(std::function<double(double)> speed,
                               std::function<double(double)> slope) {
  if (!speed || !slope) throw ConfigError("dispersion profile needs speed and slope callables");
  Dispersion d;
  d.speed_ = std::move(speed);
  d.slope_ = std::move(slope);
  return d;
}

double Dispersion::speed(double omega) const { return constant_ ? *constant_ : speed_(omega); }
double Dispersion::slope(double omega) const { return constant_ ? 0.0 : slope_(omega); }

double Dispersion::density_factor_1d(double omega) const {
  const double c = speed(omega);
  const double num = c - omega * slope(omega);
  if (!(num > 0.0) || !(c > 0.0))
    throw DomainError("unphysical dispersion at omega = " + fmt(omega) +
                      ": c - omega c' must be > 0");
  return num / (c * c);
}

double Dispersion::density_factor_3d(double omega) const {
  const double c = speed(omega);
  return density_factor_1d(omega) / (c * c);
}

BathSpectrum BathSpectrum::example(const ExampleBathParams& params) {
  if (!(std::isfinite(params.G) && params.G >= 0.0)) throw ConfigError("bath.G: must be finite and >= 0");
  if (!(std::isfinite(params.omega_max) && params.omega_max > 0.0))
    throw ConfigError("bath.omega_max: must be finite and > 0");
  if (params.modes < 1) throw ConfigError("bath.modes: must be >= 1");
  BathSpectrum s;
  s.dispersion_ = Dispersion::constant(params.c0);
  const cdouble gamma(0.0, -params.G * std::sqrt(2.0 * kPi * params.c0 / params.omega_max));
  const double wm = params.omega_max;
  s.coupling_ = [gamma, wm](double w) { return (w >= 0.0 && w <= wm) ? gamma : cdouble(0.0, 0.0); };
  s.cutoff_ = params.omega_max;
  s.example_ = params;
  return s;
}

BathSpectrum BathSpectrum::custom(Dispersion dispersion, std::function<cdouble(double)> coupling,
                                  double cutoff) {
  if (!coupling) throw ConfigError("custom bath needs a coupling profile");
  if (!(std::isfinite(cutoff) && cutoff > 0.0)) throw ConfigError("bath cutoff must be > 0");
  BathSpectrum s;
  s.dispersion_ = std::move(dispersion);
  s.coupling_ = std::move(coupling);
  s.cutoff_ = cutoff;
  return s;
}

cdouble BathSpectrum::coupling(double omega) const { return coupling_(omega); }

double BathSpectrum::spectral_density(double omega) const {
  if (omega < 0.0 || omega > cutoff_) return 0.0;
  const double g2 = std::norm(coupling_(omega));
  if (g2 == 0.0) return 0.0;
  return omega * dispersion_.density_factor_1d(omega) * g2;
}

std::vector<double> BathSpectrum::mode_frequencies() const {
  if (!example_) throw ConfigError("discrete modes are defined for the example bath only");
  std::vector<double> w(example_->modes);
  for (std::size_t l = 0; l < w.size(); ++l)
    w[l] = example_->omega_max * static_cast<double>(l + 1) / static_cast<double>(example_->modes);
  return w;
}

std::vector<cdouble> BathSpectrum::mode_couplings() const {
  const std::vector<double> w = mode_frequencies();
  std::vector<cdouble> g(w.size());
  const double n = static_cast<double>(example_->modes);
  for (std::size_t l = 0; l < w.size(); ++l) g[l] = cdouble(0.0, -example_->G * std::sqrt(w[l] / n));
  return g;
}

double BathSpectrum::bath_length() const {
  if (!example_) throw ConfigError("bath length is defined for the example bath only");
  return 2.0 * kPi * example_->c0 * static_cast<double>(example_->modes) / example_->omega_max;
}

double BathSpectrum::recurrence_time() const {
  if (!example_) throw ConfigError("recurrence time is defined for the example bath only");
  return 2.0 * kPi * static_cast<double>(example_->modes) / example_->omega_max;
}

cdouble correlation_kernel_closed_form(const ExampleBathParams& p, double omega0, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("correlation kernel needs tau >= 0");
  const double g2 = p.G * p.G;
  const double w = p.omega_max;
  const double x = w * tau;
  const cdouble carrier = std::polar(1.0, omega0 * tau);
  if (x < 1.0) {
    // int_0^W w e^{-i w tau} dw = W^2 sum_n (-i x)^n / (n! (n + 2)).
    cdouble sum(0.0, 0.0);
    cdouble term(1.0, 0.0);   // (-i x)^n / n!
    for (int n = 0; n < 40; ++n) {
      const cdouble contrib = term / static_cast<double>(n + 2);
      sum += contrib;
      if (std::abs(contrib) < 1e-18 * std::abs(sum)) break;
      term *= cdouble(0.0, -x) / static_cast<double>(n + 1);
    }
    return g2 * w * carrier * sum;
  }
  const double c = std::cos(x);
  const double s = std::sin(x);
  const double half = std::sin(0.5 * x);
  const cdouble bracket(-2.0 * half * half + x * s, x * c - s);
  return (g2 / w) * carrier * bracket / (tau * tau);
}

cdouble correlation_kernel_quadrature(const BathSpectrum& spectrum, double omega0, double tau,
                                      double* error_estimate) {
  if (!(tau >= 0.0)) throw ConfigError("correlation kernel needs tau >= 0");
  if (!(omega0 > 0.0)) throw ConfigError("correlation kernel needs omega0 > 0");
  const double cutoff = spectrum.cutoff();
  const double span = std::max(omega0, cutoff - omega0);
  const std::size_t panels =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tau * span / kPi)));
  std::vector<double> breaks;
  breaks.reserve(panels + 2);
  for (std::size_t i = 0; i <= panels; ++i)
    breaks.push_back(cutoff * static_cast<double>(i) / static_cast<double>(panels));
  if (omega0 > 0.0 && omega0 < cutoff) {
    breaks.push_back(omega0);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [cutoff](double a, double b) { return std::abs(a - b) < 1e-14 * cutoff; }),
                 breaks.end());
  }
  const auto mass = integrate_adaptive_real([&](double w) { return spectrum.spectral_density(w); },
                                            breaks, AdaptiveOptions{0.0, 1e-12});
  const double scale = std::abs(mass.value) / (2.0 * kPi);
  if (scale == 0.0) {
    if (error_estimate) *error_estimate = 0.0;
    return {0.0, 0.0};
  }
  AdaptiveOptions options;
  options.rel_tol = 1e-12;
  options.abs_tol = 1e-13 * scale;
  const auto r = integrate_adaptive(
      [&](double w) { return spectrum.spectral_density(w) * std::polar(1.0, -(w - omega0) * tau); },
      breaks, options);
  const cdouble value = r.value / (2.0 * kPi);
  const double err = r.error / (2.0 * kPi);
  if (error_estimate) *error_estimate = err;
  if (!r.converged)
    throw NumericalError("correlation kernel quadrature did not converge at tau = " + fmt(tau) +
                         " (residual estimate " + fmt(err) + ")");
  return value;
}

cdouble correlation_kernel(const BathSpectrum& spectrum, double omega0, double tau) {
  if (!(omega0 > 0.0)) throw ConfigError("correlation kernel needs omega0 > 0");
  if (spectrum.example_params()) return correlation_kernel_closed_form(*spectrum.example_params(), omega0, tau);
  return correlation_kernel_quadrature(spectrum, omega0, tau);
}

RatePair closed_form_rates(const ExampleBathParams& p, double omega0) {
  if (!(omega0 > 0.0)) throw ConfigError("detector.omega0: must be > 0");
  if (!(p.omega_max > omega0))
    throw DomainError("shift closed form has a log singularity: omega_max (" + fmt(p.omega_max) +
                      ") must exceed omega0 (" + fmt(omega0) + ")");
  const double g2 = p.G * p.G;
  const double r = omega0 / p.omega_max;
  return RatePair{2.0 * kPi * g2 * r,
                  2.0 * g2 * (r * std::log(omega0 / (p.omega_max - omega0)) - 1.0)};
}

double principal_value_shift(const std::function<double(double)>& g, double omega0, double cutoff) {
  AdaptiveOptions options;
  options.rel_tol = 1e-13;
  if (omega0 > 0.0 && omega0 < cutoff) {
    const double g0 = g(omega0);
    options.abs_tol = 1e-15 * (std::abs(g0) + 1e-300) * cutoff / std::max(omega0, cutoff - omega0);
    const auto r = integrate_adaptive_real(
        [&](double w) { return (g(w) - g0) / (w - omega0); }, {0.0, omega0, cutoff}, options);
    if (!r.converged)
      throw NumericalError("principal-value quadrature did not converge (residual " + fmt(r.error) + ")");
    return -(r.value.real() + g0 * std::log((cutoff - omega0) / omega0)) / kPi;
  }
  if (omega0 == 0.0 || omega0 == cutoff)
    throw DomainError("principal value diverges when omega0 sits on an integration endpoint");
  const auto r = integrate_adaptive_real([&](double w) { return g(w) / (w - omega0); },
                                         {0.0, cutoff}, options);
  if (!r.converged)
    throw NumericalError("shift quadrature did not converge (residual " + fmt(r.error) + ")");
  return -r.value.real() / kPi;
}

RatePair spectral_rates(const BathSpectrum& spectrum, double omega0) {
  if (!(omega0 > 0.0)) throw ConfigError("detector.omega0: must be > 0");
  const auto f = [&](double w) { return spectrum.spectral_density(w); };
  return RatePair{f(omega0), principal_value_shift(f, omega0, spectrum.cutoff())};
}

namespace {

// int_0^T kappa(tau) e^{-eps_j tau} for all regulators, and the same with 2T.
struct AbelSums {
  std::vector<cdouble> at_T;
  std::vector<cdouble> at_2T;
};

AbelSums time_domain_sums(const BathSpectrum& spectrum, double omega0,
                          const std::vector<double>& eps, double truncation) {
  const double span = std::max(omega0, spectrum.cutoff() - omega0);
  const double h = kPi / span;
  const double log_factor = std::log(1.0 / truncation);
  std::vector<std::size_t> panels(eps.size());
  for (std::size_t j = 0; j < eps.size(); ++j)
    panels[j] = static_cast<std::size_t>(std::ceil(log_factor / eps[j] / h));
  const std::size_t total = 2 * *std::max_element(panels.begin(), panels.end());
  const QuadratureRule& rule = gauss_legendre(20);
  AbelSums sums{std::vector<cdouble>(eps.size()), std::vector<cdouble>(eps.size())};
  std::vector<cdouble> panel_sum(eps.size());
  for (std::size_t p = 0; p < total; ++p) {
    std::fill(panel_sum.begin(), panel_sum.end(), cdouble(0.0, 0.0));
    const double a = h * static_cast<double>(p);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double tau = a + 0.5 * h * (rule.nodes[q] + 1.0);
      const cdouble kw = correlation_kernel(spectrum, omega0, tau) * (0.5 * h * rule.weights[q]);
      for (std::size_t j = 0; j < eps.size(); ++j)
        if (p < 2 * panels[j]) panel_sum[j] += kw * std::exp(-eps[j] * tau);
    }
    for (std::size_t j = 0; j < eps.size(); ++j) {
      if (p < panels[j]) sums.at_T[j] += panel_sum[j];
      if (p < 2 * panels[j]) sums.at_2T[j] += panel_sum[j];
    }
  }
  return sums;
}

std::vector<cdouble> frequency_domain_sums(const BathSpectrum& spectrum, double omega0,
                                           const std::vector<double>& eps) {
  const double cutoff = spectrum.cutoff();
  std::vector<cdouble> out(eps.size());
  for (std::size_t j = 0; j < eps.size(); ++j) {
    std::vector<double> breaks{0.0, cutoff};
    for (double d : {-10.0, -1.0, 0.0, 1.0, 10.0}) {
      const double b = omega0 + d * eps[j];
      if (b > 0.0 && b < cutoff) breaks.push_back(b);
    }
    std::sort(breaks.begin(), breaks.end());
    AdaptiveOptions options;
    options.rel_tol = 1e-13;
    const auto r = integrate_adaptive(
        [&](double w) { return spectrum.spectral_density(w) / cdouble(eps[j], w - omega0); }, breaks,
        options);
    if (!r.converged)
      throw NumericalError("regularized rate quadrature did not converge (residual " +
                           fmt(r.error) + ")");
    out[j] = r.value / (2.0 * kPi);
  }
  return out;
}

}  // namespace

DecayRates decay_rate_and_shift(const BathSpectrum& spectrum, double omega0,
                                const RateOptions& options) {
  if (!(std::isfinite(omega0) && omega0 > 0.0)) throw ConfigError("detector.omega0: must be > 0");
  if (options.levels < 2) throw ConfigError("rate extrapolation needs at least 2 levels");
  if (!(options.first_regulator > 0.0)) throw ConfigError("rate regulator must be > 0");
  if (!(options.truncation > 0.0 && options.truncation < 1.0))
    throw ConfigError("rate truncation must lie in (0, 1)");

  DecayRates out;
  const auto& example = spectrum.example_params();
  RatePair reference{};
  if (example) {
    reference = closed_form_rates(*example, omega0);   // DomainError if omega_M <= omega0
    out.reference = "closed_form";
    out.method = "time_domain";
  } else {
    reference = spectral_rates(spectrum, omega0);
    out.reference = "spectral";
    out.method = "frequency_domain";
  }
  out.A_reference = reference.A;
  out.shift_reference = reference.shift;

  if (example && example->G == 0.0) return out;

  std::vector<double> eps(static_cast<std::size_t>(options.levels));
  for (std::size_t j = 0; j < eps.size(); ++j)
    eps[j] = options.first_regulator * omega0 * std::pow(0.5, static_cast<double>(j));

  std::vector<cdouble> values;
  if (example) {
    const AbelSums sums = time_domain_sums(spectrum, omega0, eps, options.truncation);
    values = sums.at_T;
    for (std::size_t j = 0; j < eps.size(); ++j) {
      const double scale = std::max(std::abs(sums.at_T[j]), 1e-300);
      out.truncation_check = std::max(out.truncation_check, std::abs(sums.at_2T[j] - sums.at_T[j]) / scale);
    }
  } else {
    values = frequency_domain_sums(spectrum, omega0, eps);
  }
  // Extrapolate from the finest end, where the regulators are closest to zero.
  const auto [integral, err] = extrapolate_to_zero(eps, values);
  out.A = 2.0 * integral.real();
  out.shift = 2.0 * integral.imag();
  const double scale = std::max(std::abs(out.A), std::abs(out.shift));
  out.extrapolation_error = scale > 0.0 ? 2.0 * err / scale : 0.0;

  if (out.truncation_check > 1e-8)
    out.warnings.push_back("rate integral changed by " + fmt(out.truncation_check) +
                           " relative when doubling the truncation time");
  if (out.A < 0.0) {
    if (-out.A <= 1e-10 * scale) {
      out.A = 0.0;
    } else {
      throw NumericalError("decay rate came out negative: " + fmt(out.A));
    }
  }

  const double ref_scale = std::max(std::abs(reference.A), std::abs(reference.shift));
  const double dA = relative_difference(out.A, reference.A, 1e-3 * ref_scale);
  const double dS = relative_difference(out.shift, reference.shift, 1e-3 * ref_scale);
  if (ref_scale > 0.0 && (dA > options.agreement || dS > options.agreement)) {
    const std::string msg = "rate quadrature disagrees with the " + out.reference +
                            " route: relative differences A " + fmt(dA) + ", shift " + fmt(dS);
    if (example) throw NumericalError(msg);
    out.warnings.push_back(msg);
  }
  return out;
}

double correlation_time(const BathSpectrum& spectrum, double omega0, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("correlation threshold must be in (0, 1)");
  const double k0 = std::abs(correlation_kernel(spectrum, omega0, 0.0));
  if (k0 == 0.0) return 0.0;
  const double span = std::max(omega0, spectrum.cutoff() - omega0);
  const double step = 0.05 / span;
  double tau_max = 64.0 * 2.0 * kPi / span;
  for (int attempt = 0; attempt < 16; ++attempt, tau_max *= 2.0) {
    const std::size_t n = static_cast<std::size_t>(std::ceil(tau_max / step)) + 1;
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i)
      mag[i] = std::abs(correlation_kernel(spectrum, omega0, step * static_cast<double>(i))) / k0;
    // Running maximum from the right is the envelope bound.
    double env = 0.0;
    std::size_t first = n;
    for (std::size_t i = n; i-- > 0;) {
      env = std::max(env, mag[i]);
      if (env < threshold) first = i;
      else break;
    }
    if (first < n && step * static_cast<double>(first) < 0.5 * tau_max)
      return step * static_cast<double>(first);
  }
  throw NumericalError("correlation kernel envelope did not fall below threshold");
}

}  // namespace arrival
