#pragma once

namespace arrival {

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kCesiumMass = 2.2069e-25;     // kg

// SI <-> internal conversion. Internally hbar = m = 1, time unit 1/omega_ref,
// length unit sqrt(hbar / (m omega_ref)).
class UnitSystem {
 public:
  UnitSystem(double reference_frequency, double particle_mass);

  double reference_frequency() const { return omega_; }
  double particle_mass() const { return mass_; }
  double time_unit() const { return t0_; }
  double length_unit() const { return l0_; }
  double energy_unit() const { return kHbar * omega_; }

  double time_to_internal(double t) const { return t / t0_; }
  double time_to_si(double t) const { return t * t0_; }
  double length_to_internal(double x) const { return x / l0_; }
  double length_to_si(double x) const { return x * l0_; }
  double wavenumber_to_internal(double k) const { return k * l0_; }
  double wavenumber_to_si(double k) const { return k / l0_; }
  double rate_to_internal(double r) const { return r * t0_; }
  double rate_to_si(double r) const { return r / t0_; }
  double energy_to_internal(double e) const { return e / energy_unit(); }
  double energy_to_si(double e) const { return e * energy_unit(); }
  // 1D wavefunction amplitudes carry units of length^(-1/2).
  double amplitude_to_internal(double a) const { return a * sqrt_l0_; }
  double amplitude_to_si(double a) const { return a / sqrt_l0_; }

 private:
  double omega_;
  double mass_;
  double t0_;
  double l0_;
  double sqrt_l0_;
};

}  // namespace arrival
