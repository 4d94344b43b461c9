#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "arrival/geometry.hpp"
#include "arrival/grid.hpp"
#include "arrival/packet.hpp"
#include "arrival/rate_map.hpp"
#include "arrival/units.hpp"

namespace arrival {

// V(x) = (hbar/2)(shift(x) - i A(x)), stored as V/hbar in s^-1.
struct ComplexPotential {
  Grid1D grid;
  std::vector<cdouble> V_over_hbar;

  static ComplexPotential zero(const Grid1D& grid);
  // Loss rate -2 Im V / hbar at each node, s^-1.
  std::vector<double> loss_rate() const;
  // Throws DomainError if Im V > 0 anywhere.
  void validate() const;
};

ComplexPotential build_conditional_potential(double A, double shift, const Sensitivity1D& chi,
                                             const Grid1D& grid, bool include_shift = true);
// 1D map sampled on the nodes of `grid` (linear interpolation, zero outside the map).
ComplexPotential build_conditional_potential(const RateMap& map, const Grid1D& grid,
                                             bool include_shift = true);

// V = hbar (Delta Omega^2 - i gamma Omega^2 / 2) / (4 Delta^2 + gamma^2); all inputs s^-1.
ComplexPotential one_channel_limit_potential(const std::vector<double>& rabi, double detuning,
                                             double decay, const Grid1D& grid);

struct PropagationOptions {
  double t_start = 0.0;                 // s
  double t_end = 0.0;                   // s
  double dt = 0.0;                      // s, upper bound; the step is span / ceil(span / dt)
  std::size_t snapshots = 512;          // stored fields, evenly spaced in steps, ends included
  int fd_order = 6;                     // 2, 4, 6 or 8
  int pade_order = 3;                   // diagonal Pade degree; 1 is Crank-Nicolson
  double kinetic_safety = 1.0;
  double max_potential_phase = 0.1;
  std::optional<double> carrier_wavenumber;   // 1/m, estimated from psi0 when empty
  double correlation_time = 0.0;        // s, recorded only
  double edge_fraction = 0.02;          // outer fraction of the grid watched for boundary mass
  double edge_mass_warning = 1e-6;
};

struct MassSplit {
  double detected = 0.0;
  double reflected = 0.0;
  double transmitted_undetected = 0.0;
  double inside = 0.0;        // undetected mass still inside a finite region
  double residual = 0.0;      // 1 - detected - reflected - transmitted_undetected - inside
  std::vector<std::string> warnings;
};

struct ConditionalTrajectory {
  Grid1D grid{0.0, 1.0, 2};
  std::size_t channels = 1;
  double mass = 0.0;
  double dt = 0.0;                      // step actually used, s
  double carrier_wavenumber = 0.0;      // 1/m

  std::vector<double> t;                // s, every step
  std::vector<double> P0;               // squared norm of all channels
  std::vector<double> w1;               // s^-1, loss density from the anti-Hermitian part of V
  std::vector<std::vector<double>> channel_norm;   // [channel][step]

  std::vector<double> snapshot_times;
  std::vector<std::vector<std::vector<cdouble>>> snapshots;   // [snapshot][channel][node], SI
  std::vector<std::vector<cdouble>> final_state;              // [channel][node], SI

  // Diagnostics.
  double norm_balance = 0.0;        // max |w1 + dP0/dt| / max w1
  double integral_balance = 0.0;    // |int w1 dt - (P0(t_start) - P0(t_end))|
  double w1_form_discrepancy = 0.0; // max |w1 - (i/hbar)<psi|H - H^+|psi>| / max w1
  double max_norm_increase = 0.0;   // max over steps of P0(n+1) - P0(n)
  double max_edge_mass = 0.0;
  double correlation_time = 0.0;
  std::string validity_note;
  std::optional<MassSplit> final_split;
  std::vector<std::string> warnings;
};

ConditionalTrajectory propagate_conditional(const std::vector<cdouble>& psi0,
                                            const ComplexPotential& V, double mass,
                                            const PropagationOptions& options,
                                            const std::optional<Sensitivity1D>& region = {});

// w1(t) = int A(x) |psi(x,t)|^2 dx over the stored snapshots (s^-1).
std::vector<double> detection_density(const ConditionalTrajectory& trajectory,
                                      const std::vector<double>& rate);
std::vector<double> detection_density(const ConditionalTrajectory& trajectory, double A,
                                      const Sensitivity1D& chi);

struct TwoChannelState {
  Grid1D grid{0.0, 1.0, 2};
  std::vector<cdouble> ground;    // 1/sqrt(m)
  std::vector<cdouble> excited;
  std::vector<double> rabi;       // Omega(x), s^-1
  double detuning = 0.0;          // s^-1
  double decay = 0.0;             // s^-1

  void validate() const;
};

// H = p^2/2m + (hbar/2)[[0, Omega], [Omega, -i gamma - 2 Delta]]; w1 = gamma ||excited||^2.
ConditionalTrajectory propagate_two_channel(const TwoChannelState& state, double mass,
                                            const PropagationOptions& options);

// Phase advance per node of sum conj(psi_i) psi_{i+1}, divided by the spacing (1/m).
double mean_wavenumber(const std::vector<cdouble>& psi, const Grid1D& grid);

}  // namespace arrival
