#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace arrival {

using cdouble = std::complex<double>;

// Boson dispersion: phase velocity c(omega) and its derivative c'(omega).
class Dispersion {
 public:
  static Dispersion constant(double c0);
  static Dispersion profile(std::function<double(double)> speed,
                            std::function<double(double)> slope);

  double speed(double omega) const;
  double slope(double omega) const;
  bool is_constant() const { return constant_.has_value(); }

  // (c - omega c') / c^2 and (c - omega c') / c^4. DomainError if c - omega c' <= 0.
  double density_factor_1d(double omega) const;
  double density_factor_3d(double omega) const;

 private:
  std::optional<double> constant_;
  std::function<double(double)> speed_;
  std::function<double(double)> slope_;
};

// Rectangular coupling Gamma(omega) = -i G sqrt(2 pi c0 / omega_M) below omega_M,
// with its N-mode discrete counterpart omega_l = l omega_M / N.
struct ExampleBathParams {
  double G = 0.0;           // s^-1/2
  double omega_max = 0.0;   // s^-1
  std::size_t modes = 1;
  double c0 = 1.0;          // m/s
};

class BathSpectrum {
 public:
  static BathSpectrum example(const ExampleBathParams& params);
  static BathSpectrum custom(Dispersion dispersion, std::function<cdouble(double)> coupling,
                             double cutoff);

  cdouble coupling(double omega) const;
  // f(omega) = omega (c - omega c')/c^2 |Gamma|^2 in s^-1; kappa = (1/2pi) int f e^{-i(w-w0)tau}.
  double spectral_density(double omega) const;
  double cutoff() const { return cutoff_; }
  const Dispersion& dispersion() const { return dispersion_; }
  const std::optional<ExampleBathParams>& example_params() const { return example_; }

  // Discrete block, example spectra only.
  std::vector<double> mode_frequencies() const;
  std::vector<cdouble> mode_couplings() const;
  double bath_length() const;
  double recurrence_time() const;   // 2 pi N / omega_M

 private:
  BathSpectrum() = default;
  Dispersion dispersion_ = Dispersion::constant(1.0);
  std::function<cdouble(double)> coupling_;
  double cutoff_ = 0.0;
  std::optional<ExampleBathParams> example_;
};

// kappa(tau) in s^-2: closed form for example spectra, adaptive quadrature otherwise.
cdouble correlation_kernel(const BathSpectrum& spectrum, double omega0, double tau);

// Always by quadrature; error_estimate receives the absolute error bound.
cdouble correlation_kernel_quadrature(const BathSpectrum& spectrum, double omega0, double tau,
                                      double* error_estimate = nullptr);

cdouble correlation_kernel_closed_form(const ExampleBathParams& params, double omega0, double tau);

struct RateOptions {
  double first_regulator = 0.25;   // in units of omega0
  int levels = 7;                  // regulators first_regulator * 2^-j
  double truncation = 1e-10;       // |kappa(T)| e^{-eps T} <= truncation |kappa(0)|
  double agreement = 1e-6;         // required agreement with the reference route
};

struct DecayRates {
  double A = 0.0;                  // s^-1
  double shift = 0.0;              // s^-1
  double A_reference = 0.0;
  double shift_reference = 0.0;
  std::string reference;           // "closed_form" or "spectral"
  std::string method;              // "time_domain" or "frequency_domain"
  double extrapolation_error = 0.0;  // relative
  double truncation_check = 0.0;     // relative change on doubling T
  std::vector<std::string> warnings;
};

// A = 2 Re int_0^inf kappa, shift = 2 Im int_0^inf kappa. For example spectra the
// integral runs over tau with the closed-form kernel and is checked against the
// closed forms (NumericalError on disagreement); for custom spectra it is taken
// in frequency space and compared with the principal-value route (warning only).
DecayRates decay_rate_and_shift(const BathSpectrum& spectrum, double omega0,
                                const RateOptions& options = {});

struct RatePair {
  double A = 0.0;
  double shift = 0.0;
};

// Closed forms of the example; DomainError when omega_M <= omega0.
RatePair closed_form_rates(const ExampleBathParams& params, double omega0);

// A = f(omega0), shift = -(1/pi) PV int f(w)/(w - omega0) dw.
RatePair spectral_rates(const BathSpectrum& spectrum, double omega0);

// -(1/pi) PV int_0^cutoff g(w)/(w - omega0) dw for a smooth g.
double principal_value_shift(const std::function<double(double)>& g, double omega0, double cutoff);

// First tau beyond which |kappa(tau)|/|kappa(0)| stays below threshold.
double correlation_time(const BathSpectrum& spectrum, double omega0, double threshold = 0.01);

}  // namespace arrival
