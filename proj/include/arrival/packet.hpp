#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "arrival/grid.hpp"

namespace arrival {

using cdouble = std::complex<double>;

// Minimal-uncertainty Gaussian packet, all fields SI.
struct GaussianPacketSpec {
  double mass = 0.0;             // kg
  double mean_velocity = 0.0;    // m/s
  double momentum_width = 0.0;   // kg m/s
  double focal_position = 0.0;   // m
  double focal_time = 0.0;       // s

  // Throws ConfigError naming the offending field.
  void validate() const;

  double central_wavenumber() const;   // m v0 / hbar
  double wavenumber_width() const;     // dp / hbar
  double position_width() const;       // hbar / (2 dp)
  double velocity_width() const;       // dp / m
  double energy(double k) const;       // hbar^2 k^2 / 2m
};

cdouble momentum_amplitude(const GaussianPacketSpec& spec, double k);

std::vector<cdouble> free_evolved_packet(const GaussianPacketSpec& spec, double t,
                                         const Grid1D& grid);

double packet_center_at(const GaussianPacketSpec& spec, double t);
double packet_width_at(const GaussianPacketSpec& spec, double t);

// Probability of the freely evolved packet at x > x0.
double probability_beyond(const GaussianPacketSpec& spec, double t, double x0);

// Latest time t <= focal_time at which probability_beyond(region_start) <= max_overlap.
double start_time_for_overlap(const GaussianPacketSpec& spec, double region_start,
                              double max_overlap = 1e-10);

// Discretized momentum amplitude: quadrature nodes k (1/m), weights (1/m) and psi~(k).
struct MomentumSamples {
  double mass = 0.0;
  std::vector<double> k;
  std::vector<double> weight;
  std::vector<cdouble> amplitude;

  std::size_t size() const { return k.size(); }
  double norm() const;  // sum w |psi~|^2
};

// Uniform trapezoid over k0 +- window_sigmas * dp/hbar.
MomentumSamples momentum_samples(const GaussianPacketSpec& spec, std::size_t n_nodes = 2001,
                                 double window_sigmas = 8.0);

// Escape hatch for arbitrary packets: psi~ given on increasing k (all > 0),
// linearly interpolated onto a uniform trapezoid rule with n_nodes points.
MomentumSamples tabulated_momentum_samples(const std::vector<double>& k,
                                           const std::vector<cdouble>& amplitude, double mass,
                                           std::size_t n_nodes = 2001);

// (2 pi)^(-1/2) sum_j w_j psi~(k_j) exp(i k_j x - i E_j t / hbar).
std::vector<cdouble> synthesize_free_packet(const MomentumSamples& samples, double t,
                                            const Grid1D& grid);

}  // namespace arrival
