#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arrival/bath.hpp"
#include "arrival/geometry.hpp"
#include "arrival/grid.hpp"
#include "arrival/packet.hpp"
#include "arrival/units.hpp"

namespace arrival {

// One spin on the half line x >= 0 coupled to N discrete boson modes.
struct DiscreteModel {
  UnitSystem units;
  double omega0 = 0.0;                    // s^-1
  std::vector<double> mode_frequencies;   // s^-1
  std::vector<cdouble> couplings;         // s^-1
  double recurrence_time = 0.0;           // s

  // Requires one spin, a half-line sensitivity starting at 0 and an example bath.
  static DiscreteModel build(const DetectorGeometry& geometry, const BathSpectrum& bath,
                             double particle_mass);
  std::size_t modes() const { return mode_frequencies.size(); }
};

// Eigenpairs of H - p^2/2m on x > 0 in the bare basis {|up,0>, |down,1_l>}.
// Eigenvalues are hbar*Omega/2; columns of U have their largest entry real positive.
struct InteriorEigenbasis {
  std::vector<double> Omega;   // s^-1, ascending
  Eigen::MatrixXcd U;
  double residual = 0.0;       // ||M U - U Lambda|| / ||M||
  double unitarity_error = 0.0;
};

InteriorEigenbasis interior_eigenmodes(const DiscreteModel& model);

// k_l = sqrt(k^2 + 2m(omega0 - omega_l)/hbar), q_mu = sqrt(k^2 + m(omega0 - Omega_mu)/hbar).
// Propagating roots are positive real; evanescent roots are +i|.|, so that
// e^{-i k_l x} decays for x -> -inf and e^{i q_mu x} decays for x -> +inf.
struct ChannelWavenumbers {
  std::vector<cdouble> k_channel;   // 1/m, N entries
  std::vector<cdouble> q_mode;      // 1/m, N+1 entries
};

ChannelWavenumbers channel_wavenumbers(const DiscreteModel& model, const InteriorEigenbasis& basis,
                                       double k);

struct ScatteringSolution {
  double k = 0.0;                     // 1/m
  std::vector<cdouble> k_channel;
  std::vector<cdouble> q_mode;
  cdouble R0;
  std::vector<cdouble> R;
  std::vector<cdouble> alpha;
  double flux_defect = 0.0;           // |k - outgoing flux| / k
  double matching_residual = 0.0;     // max value/derivative jump at x = 0, relative
  bool retried = false;
};

// Dense 2(N+1) solve of value and derivative continuity at x = 0.
ScatteringSolution match_at_origin(const DiscreteModel& model, const InteriorEigenbasis& basis,
                                   double k);

struct DiscreteOptions {
  std::size_t k_nodes = 2001;
  double window_sigmas = 8.0;
  std::size_t chunk = 512;   // superposition terms per matrix product
};

// Channel fields (1/sqrt(m)) at time t: index 0 is |up,0>, index l is |down,1_l>.
struct SectorState {
  double t = 0.0;
  Grid1D grid;
  std::vector<std::vector<cdouble>> channels;
  std::size_t dropped_nodes = 0;

  double channel_norm(std::size_t c) const;   // trapezoid
  double norm() const;
};

SectorState evolve_packet_discrete(const MomentumSamples& samples, double t, const Grid1D& grid,
                                   const DiscreteModel& model, const DiscreteOptions& options = {});
SectorState evolve_packet_discrete(const GaussianPacketSpec& spec, double t, const Grid1D& grid,
                                   const DiscreteModel& model, const DiscreteOptions& options = {});

struct DiscreteDensity {
  std::vector<double> t;    // s
  std::vector<double> P0;   // probability in |up,0>
  std::vector<double> P1;   // 1 - P0
  std::vector<double> w1;   // s^-1, centred differences of P1
  double recurrence_time = 0.0;
  double max_edge_mass = 0.0;
  std::size_t dropped_nodes = 0;
  std::vector<std::string> warnings;
};

// t_grid must be uniform. The spatial grid must cover the packet at all times.
DiscreteDensity detection_density_discrete(const MomentumSamples& samples, const DiscreteModel& model,
                                           const std::vector<double>& t_grid, const Grid1D& grid,
                                           const DiscreteOptions& options = {});
DiscreteDensity detection_density_discrete(const GaussianPacketSpec& spec, const DiscreteModel& model,
                                           const std::vector<double>& t_grid, const Grid1D& grid,
                                           const DiscreteOptions& options = {});

// Centred differences with second-order one-sided ends.
std::vector<double> centred_derivative(const std::vector<double>& y, double h);

}  // namespace arrival
