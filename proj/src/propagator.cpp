#include "arrival/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wmaybe-uninitialized"
#include <Eigen/Eigenvalues>
#pragma GCC diagnostic pop

#include "arrival/analysis.hpp"
#include "arrival/banded.hpp"
#include "arrival/errors.hpp"

namespace arrival {

namespace {

constexpr cdouble kI(0.0, 1.0);

// Absorbed tails decay into the subnormal range, where arithmetic is an
// order of magnitude slower; flush them to zero while stepping.
class FlushSubnormals {
 public:
#if defined(__SSE2__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | _MM_FLUSH_ZERO_ON | _MM_DENORMALS_ZERO_ON); }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

// Central-difference weights for offsets 0..r (first derivative: antisymmetric, second: symmetric).
struct Stencil {
  std::vector<double> d1;
  std::vector<double> d2;
};

Stencil central_stencil(int order) {
  switch (order) {
    case 2:
      return {{0.0, 0.5}, {-2.0, 1.0}};
    case 4:
      return {{0.0, 2.0 / 3.0, -1.0 / 12.0}, {-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0}};
    case 6:
      return {{0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0},
              {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0}};
    case 8:
      return {{0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0},
              {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0}};
    default:
      throw ConfigError("fd_order must be 2, 4, 6 or 8");
  }
}

// Roots r of the numerator of the diagonal (m,m) Pade approximant of exp(z).
// exp(-i H dt) ~ prod_r (1 + i H dt / r) / (1 - i H dt / r).
std::vector<cdouble> pade_roots(int m) {
  if (m < 1 || m > 8) throw ConfigError("pade_order must be between 1 and 8");
  std::vector<double> c(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) {
    c[static_cast<std::size_t>(j)] = std::tgamma(2.0 * m - j + 1) * std::tgamma(m + 1.0) /
                                     (std::tgamma(2.0 * m + 1) * std::tgamma(j + 1.0) *
                                      std::tgamma(m - j + 1.0));
  }
  if (m == 1) return {cdouble(-c[0] / c[1], 0.0)};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < m; ++i) companion(i, m - 1) = -c[static_cast<std::size_t>(i)] / c[static_cast<std::size_t>(m)];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<cdouble> roots(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) roots[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
  std::sort(roots.begin(), roots.end(),
            [](cdouble a, cdouble b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  return roots;
}

double trapezoid(const std::vector<double>& y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

// Multichannel propagation in a frame demodulated by exp(i kc x - i kc^2 t / 2).
// fields: [channel][node] SI amplitudes; V: [node][a*C+b] of V/hbar in s^-1.
ConditionalTrajectory propagate_channels(const std::vector<std::vector<cdouble>>& fields,
                                         const Grid1D& grid,
                                         const std::vector<std::vector<cdouble>>& V, double mass,
                                         const PropagationOptions& opt) {
  const std::size_t C = fields.size();
  const std::size_t nx = grid.size();
  if (C == 0) throw ConfigError("no channels to propagate");
  for (const auto& f : fields)
    if (f.size() != nx) throw ConfigError("initial field size does not match the grid");
  if (V.size() != nx) throw ConfigError("potential size does not match the grid");
  if (!(mass > 0.0)) throw ConfigError("particle.mass must be positive");
  if (!(opt.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(opt.t_end > opt.t_start)) throw ConfigError("t_end must exceed t_start");
  if (!(opt.kinetic_safety > 0.0)) throw ConfigError("kinetic_safety must be positive");

  const Stencil st = central_stencil(opt.fd_order);
  const std::size_t r = st.d1.size() - 1;
  if (nx < 2 * r + 2) throw ConfigError("grid too small for the finite-difference stencil");
  const std::vector<cdouble> roots = pade_roots(opt.pade_order);

  ConditionalTrajectory out;
  out.grid = grid;
  out.channels = C;
  out.mass = mass;
  out.correlation_time = opt.correlation_time;

  // Internal units with dx = 1.
  const double dx_si = grid.spacing();
  const UnitSystem u(kHbar / (mass * dx_si * dx_si), mass);
  const double dx = u.length_to_internal(dx_si);

  const double span = opt.t_end - opt.t_start;
  const auto nsteps = static_cast<std::size_t>(std::ceil(span / opt.dt * (1.0 - 1e-12)));
  const double dt_si = span / static_cast<double>(nsteps);
  const double dt = u.time_to_internal(dt_si);
  out.dt = dt_si;

  const double kinetic_limit = opt.kinetic_safety * 2.0 * M_PI * dx * dx;
  if (dt > kinetic_limit) {
    std::ostringstream msg;
    msg << "dt = " << dt_si << " s does not resolve the kinetic phase (limit "
        << u.time_to_si(kinetic_limit) << " s)";
    throw ConfigError(msg.str());
  }
  double vmax = 0.0;
  for (const auto& Vi : V) {
    for (std::size_t a = 0; a < C; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < C; ++b) row += std::abs(Vi[a * C + b]);
      vmax = std::max(vmax, row);
    }
  }
  if (u.rate_to_internal(vmax) * dt >= opt.max_potential_phase) {
    std::ostringstream msg;
    msg << "dt = " << dt_si << " s gives potential phase dt|V|/hbar = "
        << vmax * dt_si << " (limit " << opt.max_potential_phase << ")";
    throw ConfigError(msg.str());
  }

  // Carrier.
  double kc_si = 0.0;
  if (opt.carrier_wavenumber) {
    kc_si = *opt.carrier_wavenumber;
  } else {
    cdouble s(0.0, 0.0);
    for (const auto& f : fields)
      for (std::size_t i = 0; i + 1 < nx; ++i) s += std::conj(f[i]) * f[i + 1];
    kc_si = std::abs(s) > 0.0 ? std::arg(s) / dx_si : 0.0;
  }
  out.carrier_wavenumber = kc_si;
  const double kc = u.wavenumber_to_internal(kc_si);
  if (std::abs(kc) * dx >= M_PI) throw ConfigError("carrier wavenumber exceeds the grid Nyquist limit");

  // H on the interleaved index i*C + c.
  const std::size_t n = nx * C;
  BandedMatrix H(n, r * C);
  std::vector<cdouble> T(r + 1);
  for (std::size_t s = 0; s <= r; ++s)
    T[s] = cdouble(-0.5 * st.d2[s] / (dx * dx), -kc * st.d1[s] / dx);   // offset +s; offset -s is conj
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t row = i * C + c;
      H.at(row, row) += T[0];
      for (std::size_t s = 1; s <= r; ++s) {
        if (i + s < nx) H.at(row, (i + s) * C + c) += T[s];
        if (i >= s) H.at(row, (i - s) * C + c) += std::conj(T[s]);
      }
      for (std::size_t b = 0; b < C; ++b) H.at(row, i * C + b) += u.rate_to_internal(1.0) * V[i][c * C + b];
    }
  }

  // Loss operator L = i (V - V^+) per node, internal rate units.
  std::vector<cdouble> L(nx * C * C);
  bool lossless = true;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t a = 0; a < C; ++a)
      for (std::size_t b = 0; b < C; ++b) {
        const cdouble v = kI * (V[i][a * C + b] - std::conj(V[i][b * C + a])) * u.rate_to_internal(1.0);
        L[(i * C + a) * C + b] = v;
        if (v != cdouble(0.0, 0.0)) lossless = false;
      }

  std::vector<BandedLU> lhs;
  lhs.reserve(roots.size());
  for (const cdouble root : roots) lhs.emplace_back(H.affine(-kI * dt / root, 1.0));

  std::vector<cdouble> phi(n);
  for (std::size_t i = 0; i < nx; ++i) {
    const cdouble demod = std::polar(1.0, -kc * u.length_to_internal(grid.x(i)));
    for (std::size_t c = 0; c < C; ++c) phi[i * C + c] = u.amplitude_to_internal(1.0) * fields[c][i] * demod;
  }

  const std::size_t edge = std::max<std::size_t>(r + 1, static_cast<std::size_t>(opt.edge_fraction * static_cast<double>(nx)));

  auto lab_fields = [&](double elapsed_internal) {
    std::vector<std::vector<cdouble>> lab(C, std::vector<cdouble>(nx));
    const double global = -0.5 * kc * kc * elapsed_internal;
    for (std::size_t i = 0; i < nx; ++i) {
      const cdouble ph = std::polar(u.amplitude_to_si(1.0), kc * u.length_to_internal(grid.x(i)) + global);
      for (std::size_t c = 0; c < C; ++c) lab[c][i] = phi[i * C + c] * ph;
    }
    return lab;
  };

  std::vector<std::size_t> snap_steps;
  if (opt.snapshots == 1) {
    snap_steps.push_back(nsteps);
  } else if (opt.snapshots > 1) {
    for (std::size_t s = 0; s < opt.snapshots; ++s) {
      const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(s) * static_cast<double>(nsteps) /
                                                           static_cast<double>(opt.snapshots - 1)));
      if (snap_steps.empty() || snap_steps.back() != k) snap_steps.push_back(k);
    }
  }
  std::size_t next_snap = 0;

  out.t.resize(nsteps + 1);
  out.P0.resize(nsteps + 1);
  out.w1.resize(nsteps + 1);
  out.channel_norm.assign(C, std::vector<double>(nsteps + 1));
  std::vector<double> w_op(nsteps + 1);

  std::vector<cdouble> Hphi(n);
  const FlushSubnormals flush;
  const double rate_si = u.rate_to_si(1.0);
  for (std::size_t step = 0;; ++step) {
    // Observables at the current state.
    double norm = 0.0;
    double edge_mass = 0.0;
    for (std::size_t c = 0; c < C; ++c) out.channel_norm[c][step] = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double p = std::norm(phi[i * C + c]) * dx;
        out.channel_norm[c][step] += p;
        norm += p;
        if (i < edge || i >= nx - edge) edge_mass += p;
      }
    }
    double loss = 0.0;
    if (!lossless) {
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t a = 0; a < C; ++a)
          for (std::size_t b = 0; b < C; ++b)
            loss += (std::conj(phi[i * C + a]) * L[(i * C + a) * C + b] * phi[i * C + b]).real();
    }
    H.multiply(phi.data(), Hphi.data());
    cdouble expectation(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) expectation += std::conj(phi[j]) * Hphi[j];

    out.t[step] = opt.t_start + dt_si * static_cast<double>(step);
    out.P0[step] = norm;
    out.w1[step] = loss * dx * rate_si;
    w_op[step] = -2.0 * expectation.imag() * dx * rate_si;
    out.max_edge_mass = std::max(out.max_edge_mass, edge_mass);
    if (next_snap < snap_steps.size() && snap_steps[next_snap] == step) {
      out.snapshot_times.push_back(out.t[step]);
      out.snapshots.push_back(lab_fields(dt * static_cast<double>(step)));
      ++next_snap;
    }
    if (step == nsteps) break;

    for (std::size_t f = 0; f < roots.size(); ++f) {
      if (f > 0) H.multiply(phi.data(), Hphi.data());
      const cdouble a = kI * dt / roots[f];
      for (std::size_t j = 0; j < n; ++j) phi[j] += a * Hphi[j];
      lhs[f].solve(phi.data());
    }
  }
  out.final_state = lab_fields(dt * static_cast<double>(nsteps));

  // Diagnostics.
  const double w1_max = *std::max_element(out.w1.begin(), out.w1.end());
  double balance = 0.0;
  double form = 0.0;
  for (std::size_t k = 0; k <= nsteps; ++k) form = std::max(form, std::abs(out.w1[k] - w_op[k]));
  for (std::size_t k = 2; k + 2 <= nsteps; ++k) {
    const double dP = (out.P0[k - 2] - 8.0 * out.P0[k - 1] + 8.0 * out.P0[k + 1] - out.P0[k + 2]) / (12.0 * dt_si);
    balance = std::max(balance, std::abs(out.w1[k] + dP));
  }
  for (std::size_t k = 0; k < nsteps; ++k) out.max_norm_increase = std::max(out.max_norm_increase, out.P0[k + 1] - out.P0[k]);
  out.norm_balance = w1_max > 0.0 ? balance / w1_max : balance;
  out.w1_form_discrepancy = w1_max > 0.0 ? form / w1_max : form;
  out.integral_balance = std::abs(trapezoid(out.w1, dt_si) - (out.P0.front() - out.P0.back()));

  if (out.max_edge_mass > opt.edge_mass_warning) {
    std::ostringstream msg;
    msg << "mass near the grid edges reached " << out.max_edge_mass << " (threshold " << opt.edge_mass_warning << ")";
    out.warnings.push_back(msg.str());
  }
  if (out.max_norm_increase > 1e-12) {
    std::ostringstream msg;
    msg << "norm increased by up to " << out.max_norm_increase << " in one step";
    out.warnings.push_back(msg.str());
  }
  {
    std::ostringstream note;
    const double loss_max = u.rate_to_si(1.0) * [&] {
      double m = 0.0;
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t a = 0; a < C; ++a) m = std::max(m, L[(i * C + a) * C + a].real());
      return m;
    }();
    note << "Markov limit assumes coarse-graining times well above the bath correlation time";
    if (opt.correlation_time > 0.0) note << " tau_c = " << opt.correlation_time << " s";
    if (loss_max > 0.0) {
      note << "; shortest loss time " << 1.0 / loss_max << " s";
      if (opt.correlation_time > 0.0) note << " (ratio " << 1.0 / (loss_max * opt.correlation_time) << ")";
    }
    out.validity_note = note.str();
  }
  return out;
}

}  // namespace

ComplexPotential ComplexPotential::zero(const Grid1D& grid) {
  return ComplexPotential{grid, std::vector<cdouble>(grid.size(), cdouble(0.0, 0.0))};
}

std::vector<double> ComplexPotential::loss_rate() const {
  std::vector<double> out(V_over_hbar.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -2.0 * V_over_hbar[i].imag();
  return out;
}

void ComplexPotential::validate() const {
  if (V_over_hbar.size() != grid.size()) throw ConfigError("potential size does not match its grid");
  for (std::size_t i = 0; i < V_over_hbar.size(); ++i) {
    if (!std::isfinite(V_over_hbar[i].real()) || !std::isfinite(V_over_hbar[i].imag()))
      throw DomainError("potential is not finite");
    if (V_over_hbar[i].imag() > 0.0) throw DomainError("potential has Im V > 0 (gain) at x = " + std::to_string(grid.x(i)));
  }
}

ComplexPotential build_conditional_potential(double A, double shift, const Sensitivity1D& chi,
                                             const Grid1D& grid, bool include_shift) {
  if (!(A >= 0.0)) throw DomainError("decay rate A must be non-negative");
  if (!std::isfinite(shift)) throw DomainError("level shift must be finite");
  ComplexPotential V = ComplexPotential::zero(grid);
  const double s = include_shift ? shift : 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = chi(grid.x(i));
    if (c == 0.0) continue;
    V.V_over_hbar[i] = 0.5 * cdouble(s, -A) * (c * c);
  }
  return V;
}

ComplexPotential build_conditional_potential(const RateMap& map, const Grid1D& grid, bool include_shift) {
  map.validate();
  if (map.dimension != 1) throw ConfigError("conditional propagation needs a 1D rate map");
  std::vector<double> x(map.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = map.points[i][0];
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw ConfigError("rate map points must be strictly increasing in x");
  ComplexPotential V = ComplexPotential::zero(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double A = interpolate_series(x, map.A, grid.x(i));
    if (A < 0.0) throw DomainError("decay rate A must be non-negative");
    const double s = include_shift ? interpolate_series(x, map.shift, grid.x(i)) : 0.0;
    V.V_over_hbar[i] = 0.5 * cdouble(s, -A);
  }
  return V;
}

ComplexPotential one_channel_limit_potential(const std::vector<double>& rabi, double detuning,
                                             double decay, const Grid1D& grid) {
  if (rabi.size() != grid.size()) throw ConfigError("Rabi profile size does not match the grid");
  if (!(decay >= 0.0)) throw DomainError("decay rate gamma must be non-negative");
  const double denom = 4.0 * detuning * detuning + decay * decay;
  if (!(denom > 0.0)) throw DomainError("one-channel limit undefined for detuning = decay = 0");
  ComplexPotential V = ComplexPotential::zero(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w2 = rabi[i] * rabi[i];
    V.V_over_hbar[i] = cdouble(detuning * w2 / denom, -0.5 * decay * w2 / denom);
  }
  return V;
}

ConditionalTrajectory propagate_conditional(const std::vector<cdouble>& psi0, const ComplexPotential& V,
                                            double mass, const PropagationOptions& options,
                                            const std::optional<Sensitivity1D>& region) {
  V.validate();
  std::vector<std::vector<cdouble>> pot(V.V_over_hbar.size(), std::vector<cdouble>(1));
  for (std::size_t i = 0; i < pot.size(); ++i) pot[i][0] = V.V_over_hbar[i];
  ConditionalTrajectory traj = propagate_channels({psi0}, V.grid, pot, mass, options);
  if (region) {
    traj.final_split = mass_accounting(traj, *region);
  } else {
    // Support of V as the region.
    std::size_t lo = V.grid.size();
    std::size_t hi = 0;
    for (std::size_t i = 0; i < V.grid.size(); ++i) {
      if (V.V_over_hbar[i] != cdouble(0.0, 0.0)) {
        lo = std::min(lo, i);
        hi = i;
      }
    }
    if (lo < V.grid.size()) {
      const Sensitivity1D support = hi + 1 == V.grid.size()
                                        ? Sensitivity1D::half_line(V.grid.x(lo))
                                        : Sensitivity1D::interval(V.grid.x(lo), V.grid.x(hi));
      traj.final_split = mass_accounting(traj, support);
    }
  }
  if (traj.final_split)
    for (const auto& w : traj.final_split->warnings) traj.warnings.push_back(w);
  return traj;
}

std::vector<double> detection_density(const ConditionalTrajectory& trajectory, const std::vector<double>& rate) {
  if (rate.size() != trajectory.grid.size()) throw ConfigError("rate profile size does not match the grid");
  std::vector<double> out;
  out.reserve(trajectory.snapshots.size());
  const double dx = trajectory.grid.spacing();
  for (const auto& snap : trajectory.snapshots) {
    double s = 0.0;
    for (std::size_t i = 0; i < rate.size(); ++i)
      if (rate[i] != 0.0) s += rate[i] * std::norm(snap[0][i]);
    out.push_back(s * dx);
  }
  return out;
}

std::vector<double> detection_density(const ConditionalTrajectory& trajectory, double A, const Sensitivity1D& chi) {
  if (!(A >= 0.0)) throw DomainError("decay rate A must be non-negative");
  std::vector<double> rate(trajectory.grid.size());
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const double c = chi(trajectory.grid.x(i));
    rate[i] = A * c * c;
  }
  return detection_density(trajectory, rate);
}

void TwoChannelState::validate() const {
  const std::size_t n = grid.size();
  if (ground.size() != n || excited.size() != n || rabi.size() != n)
    throw ConfigError("two-channel fields and Rabi profile must match the grid");
  for (double w : rabi)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("fluorescence.rabi must be non-negative");
  if (!(decay >= 0.0)) throw ConfigError("fluorescence.decay must be non-negative");
  if (!std::isfinite(detuning)) throw ConfigError("fluorescence.detuning must be finite");
}

ConditionalTrajectory propagate_two_channel(const TwoChannelState& state, double mass,
                                            const PropagationOptions& options) {
  state.validate();
  std::vector<std::vector<cdouble>> pot(state.grid.size(), std::vector<cdouble>(4));
  for (std::size_t i = 0; i < pot.size(); ++i) {
    pot[i][1] = pot[i][2] = 0.5 * state.rabi[i];
    pot[i][3] = cdouble(-state.detuning, -0.5 * state.decay);
  }
  return propagate_channels({state.ground, state.excited}, state.grid, pot, mass, options);
}

double mean_wavenumber(const std::vector<cdouble>& psi, const Grid1D& grid) {
  if (psi.size() != grid.size()) throw ConfigError("field size does not match the grid");
  cdouble s(0.0, 0.0);
  for (std::size_t i = 0; i + 1 < psi.size(); ++i) s += std::conj(psi[i]) * psi[i + 1];
  return std::abs(s) > 0.0 ? std::arg(s) / grid.spacing() : 0.0;
}

}  // namespace arrival
