#include "arrival/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "arrival/errors.hpp"

namespace arrival {

namespace {

constexpr double kPi = std::numbers::pi;

// Root of r with the decaying-branch convention: +sqrt(r) or +i sqrt(-r).
cdouble branch_root(double r) {
  return r >= 0.0 ? cdouble(std::sqrt(r), 0.0) : cdouble(0.0, std::sqrt(-r));
}

// Model quantities in internal units (hbar = m = 1, omega0 = 1).
struct InternalModel {
  double omega0;
  std::vector<double> omega;
  std::vector<cdouble> g;
};

InternalModel to_internal(const DiscreteModel& m) {
  InternalModel im;
  im.omega0 = m.units.rate_to_internal(m.omega0);
  for (double w : m.mode_frequencies) im.omega.push_back(m.units.rate_to_internal(w));
  for (cdouble g : m.couplings) im.g.push_back(g * m.units.time_unit());
  return im;
}

struct InternalSolution {
  cdouble R0;
  Eigen::VectorXcd R;
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd kch;
  Eigen::VectorXcd q;
  double flux_defect = 0.0;
  double residual = 0.0;
  bool retried = false;
};

void internal_wavenumbers(const InternalModel& im, const std::vector<double>& omega_mu, double k,
                          Eigen::VectorXcd& kch, Eigen::VectorXcd& q) {
  const std::size_t n = im.omega.size();
  kch.resize(static_cast<Eigen::Index>(n));
  q.resize(static_cast<Eigen::Index>(n + 1));
  for (std::size_t l = 0; l < n; ++l) kch[l] = branch_root(k * k + 2.0 * (im.omega0 - im.omega[l]));
  for (std::size_t m = 0; m <= n; ++m) q[m] = branch_root(k * k + (im.omega0 - omega_mu[m]));
}

double matching_residual(const Eigen::MatrixXcd& U, double k, const InternalSolution& s) {
  const Eigen::Index n1 = U.rows();
  const Eigen::VectorXcd value_right = U * s.alpha;
  const Eigen::VectorXcd slope_right = U * (s.q.cwiseProduct(s.alpha) * cdouble(0.0, 1.0));
  double worst = 0.0;
  for (Eigen::Index c = 0; c < n1; ++c) {
    cdouble value_left, slope_left;
    if (c == 0) {
      value_left = 1.0 + s.R0;
      slope_left = cdouble(0.0, k) * (1.0 - s.R0);
    } else {
      value_left = s.R[c - 1];
      slope_left = cdouble(0.0, -1.0) * s.kch[c - 1] * s.R[c - 1];
    }
    worst = std::max(worst, std::abs(value_left - value_right[c]));
    worst = std::max(worst, std::abs(slope_left - slope_right[c]) / k);
  }
  return worst;
}

double flux_defect(double k, const InternalSolution& s) {
  double out = k * std::norm(s.R0);
  for (Eigen::Index l = 0; l < s.R.size(); ++l)
    if (s.kch[l].imag() == 0.0) out += s.kch[l].real() * std::norm(s.R[l]);
  for (Eigen::Index m = 0; m < s.alpha.size(); ++m)
    if (s.q[m].imag() == 0.0) out += s.q[m].real() * std::norm(s.alpha[m]);
  return std::abs(k - out) / k;
}

bool solve_matching(const InternalModel& im, const std::vector<double>& omega_mu,
                    const Eigen::MatrixXcd& U, double k, InternalSolution& s) {
  const Eigen::Index n1 = U.rows();
  const Eigen::Index dim = 2 * n1;
  internal_wavenumbers(im, omega_mu, k, s.kch, s.q);
  const cdouble I(0.0, 1.0);
  // Unknowns: [R0, R_1..R_N, alpha_0..alpha_N]. Derivative rows are divided by k.
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(dim);
  for (Eigen::Index c = 0; c < n1; ++c) {
    A(c, c) = 1.0;
    const Eigen::Index d = n1 + c;
    A(d, c) = c == 0 ? cdouble(0.0, -1.0) : -I * s.kch[c - 1] / k;
    for (Eigen::Index m = 0; m < n1; ++m) {
      A(c, n1 + m) = -U(c, m);
      A(d, n1 + m) = -I * s.q[m] * U(c, m) / k;
    }
  }
  b[0] = -1.0;
  b[n1] = cdouble(0.0, -1.0);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  if (!(lu.rcond() > 1e-13)) return false;
  const Eigen::VectorXcd z = lu.solve(b);
  if (!z.allFinite()) return false;
  s.R0 = z[0];
  s.R = z.segment(1, n1 - 1);
  s.alpha = z.segment(n1, n1);
  s.residual = matching_residual(U, k, s);
  s.flux_defect = flux_defect(k, s);
  return true;
}

InternalSolution match_internal(const InternalModel& im, const std::vector<double>& omega_mu,
                                const Eigen::MatrixXcd& U, double k) {
  InternalSolution s;
  if (solve_matching(im, omega_mu, U, k, s)) return s;
  s.retried = true;
  if (solve_matching(im, omega_mu, U, k * (1.0 + 1e-12), s)) return s;
  throw NumericalError("matching system singular at k and k(1+1e-12) (k = " + std::to_string(k) +
                       " internal units)");
}

std::vector<double> internal_omegas(const DiscreteModel& model, const InteriorEigenbasis& basis) {
  std::vector<double> w(basis.Omega.size());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = model.units.rate_to_internal(basis.Omega[m]);
  return w;
}

// sum_s C(r, s) exp(i kappa_s x_b) on x_b = x0 + b dx, via chunked matrix products.
Eigen::MatrixXcd superpose(const Eigen::MatrixXcd& C, const std::vector<cdouble>& kappa, double x0,
                           double dx, std::size_t nx, std::size_t chunk) {
  const Eigen::Index rows = C.rows();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, static_cast<Eigen::Index>(nx));
  if (nx == 0 || kappa.empty()) return out;
  const std::size_t terms = kappa.size();
  chunk = std::max<std::size_t>(1, std::min(chunk, terms));
  Eigen::MatrixXcd phase(static_cast<Eigen::Index>(chunk), static_cast<Eigen::Index>(nx));
  const cdouble I(0.0, 1.0);
  for (std::size_t s0 = 0; s0 < terms; s0 += chunk) {
    const std::size_t len = std::min(chunk, terms - s0);
    for (std::size_t s = 0; s < len; ++s) {
      const cdouble kap = kappa[s0 + s];
      const cdouble step = std::exp(I * kap * dx);
      cdouble p(0.0, 0.0);
      for (std::size_t b = 0; b < nx; ++b) {
        // Re-anchor periodically to keep the recurrence at rounding level.
        if ((b & 63u) == 0) p = std::exp(I * kap * (x0 + dx * static_cast<double>(b)));
        phase(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) = p;
        p *= step;
      }
    }
    const auto L = static_cast<Eigen::Index>(len);
    out.noalias() += C.middleCols(static_cast<Eigen::Index>(s0), L) * phase.topRows(L);
  }
  return out;
}

// Per-node scattering data for a packet.
struct PacketData {
  std::vector<double> k;        // internal
  std::vector<cdouble> a;       // w psi~ / sqrt(2 pi), internal
  std::vector<InternalSolution> sol;
  std::size_t dropped = 0;
};

PacketData prepare_packet(const MomentumSamples& samples, const DiscreteModel& model,
                          const InteriorEigenbasis& basis) {
  const InternalModel im = to_internal(model);
  const std::vector<double> omega_mu = internal_omegas(model, basis);
  const double l0 = model.units.length_unit();
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);
  PacketData p;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (!(samples.k[j] > 0.0)) throw ConfigError("discrete evolution requires k > 0 quadrature nodes");
    const double k = samples.k[j] * l0;
    try {
      InternalSolution s = match_internal(im, omega_mu, basis.U, k);
      p.k.push_back(k);
      p.a.push_back(samples.weight[j] * l0 * samples.amplitude[j] / std::sqrt(l0) * inv_sqrt_2pi);
      p.sol.push_back(std::move(s));
    } catch (const NumericalError&) {
      ++p.dropped;
    }
  }
  return p;
}

struct SplitGrid {
  std::size_t n_left = 0;   // nodes with x < 0
  double x0_left = 0.0;
  double x0_right = 0.0;
  double dx = 0.0;
  std::size_t n = 0;
};

SplitGrid split_internal(const Grid1D& grid, const UnitSystem& u) {
  SplitGrid g;
  g.n = grid.size();
  g.dx = u.length_to_internal(grid.spacing());
  g.x0_left = u.length_to_internal(grid.x_min());
  while (g.n_left < g.n && grid.x(g.n_left) < 0.0) ++g.n_left;
  g.x0_right = g.n_left < g.n ? u.length_to_internal(grid.x(g.n_left)) : 0.0;
  return g;
}

double trapezoid(const std::vector<double>& rho, double dx) {
  if (rho.size() < 2) return 0.0;
  double s = 0.5 * (rho.front() + rho.back());
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) s += rho[i];
  return s * dx;
}

}  // namespace

DiscreteModel DiscreteModel::build(const DetectorGeometry& geometry, const BathSpectrum& bath,
                                   double particle_mass) {
  geometry.validate();
  if (geometry.spins.size() != 1)
    throw ConfigError("the discrete model supports exactly one spin");
  if (!geometry.sensitivity.is_half_line() || geometry.sensitivity.region_start() != 0.0)
    throw ConfigError("the discrete model requires the half-line sensitivity starting at x = 0");
  if (!bath.example_params())
    throw ConfigError("the discrete model requires the rectangular example bath");
  const double omega0 = geometry.spins[0].omega0;
  DiscreteModel m{UnitSystem(omega0, particle_mass), omega0, bath.mode_frequencies(),
                  bath.mode_couplings(), bath.recurrence_time()};
  return m;
}

InteriorEigenbasis interior_eigenmodes(const DiscreteModel& model) {
  const std::size_t n = model.modes();
  if (n < 1) throw ConfigError("discrete model needs N >= 1 modes");
  const InternalModel im = to_internal(model);
  const auto dim = static_cast<Eigen::Index>(n + 1);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(dim, dim);
  M(0, 0) = 0.5 * im.omega0;
  for (std::size_t l = 0; l < n; ++l) {
    const auto i = static_cast<Eigen::Index>(l + 1);
    M(i, i) = -0.5 * im.omega0 + im.omega[l];
    M(0, i) = im.g[l];
    M(i, 0) = std::conj(im.g[l]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(M);
  if (solver.info() != Eigen::Success) throw NumericalError("interior eigendecomposition failed");
  InteriorEigenbasis basis;
  basis.U = solver.eigenvectors();
  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::Index imax = 0;
    basis.U.col(c).cwiseAbs().maxCoeff(&imax);
    const cdouble z = basis.U(imax, c);
    basis.U.col(c) *= std::conj(z) / std::abs(z);
    basis.U(imax, c) = std::abs(z);
  }
  const Eigen::VectorXd lambda = solver.eigenvalues();
  basis.Omega.resize(n + 1);
  for (Eigen::Index m = 0; m < dim; ++m) basis.Omega[m] = model.units.rate_to_si(2.0 * lambda[m]);
  const double norm_m = M.norm();
  basis.residual = (M * basis.U - basis.U * lambda.asDiagonal()).norm() / norm_m;
  basis.unitarity_error =
      (basis.U.adjoint() * basis.U - Eigen::MatrixXcd::Identity(dim, dim)).cwiseAbs().maxCoeff();
  return basis;
}

ChannelWavenumbers channel_wavenumbers(const DiscreteModel& model, const InteriorEigenbasis& basis,
                                       double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("channel wavenumbers need k > 0");
  const double l0 = model.units.length_unit();
  Eigen::VectorXcd kch, q;
  internal_wavenumbers(to_internal(model), internal_omegas(model, basis), k * l0, kch, q);
  ChannelWavenumbers out;
  for (Eigen::Index l = 0; l < kch.size(); ++l) out.k_channel.push_back(kch[l] / l0);
  for (Eigen::Index m = 0; m < q.size(); ++m) out.q_mode.push_back(q[m] / l0);
  return out;
}

ScatteringSolution match_at_origin(const DiscreteModel& model, const InteriorEigenbasis& basis,
                                   double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("matching needs k > 0");
  const double l0 = model.units.length_unit();
  const InternalSolution s =
      match_internal(to_internal(model), internal_omegas(model, basis), basis.U, k * l0);
  ScatteringSolution out;
  out.k = k;
  for (Eigen::Index l = 0; l < s.kch.size(); ++l) out.k_channel.push_back(s.kch[l] / l0);
  for (Eigen::Index m = 0; m < s.q.size(); ++m) out.q_mode.push_back(s.q[m] / l0);
  out.R0 = s.R0;
  out.R.assign(s.R.data(), s.R.data() + s.R.size());
  out.alpha.assign(s.alpha.data(), s.alpha.data() + s.alpha.size());
  out.flux_defect = s.flux_defect;
  out.matching_residual = s.residual;
  out.retried = s.retried;
  return out;
}

double SectorState::channel_norm(std::size_t c) const {
  std::vector<double> rho(channels.at(c).size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(channels[c][i]);
  return trapezoid(rho, grid.spacing());
}

double SectorState::norm() const {
  double s = 0.0;
  for (std::size_t c = 0; c < channels.size(); ++c) s += channel_norm(c);
  return s;
}

SectorState evolve_packet_discrete(const MomentumSamples& samples, double t, const Grid1D& grid,
                                   const DiscreteModel& model, const DiscreteOptions& options) {
  const InteriorEigenbasis basis = interior_eigenmodes(model);
  const PacketData p = prepare_packet(samples, model, basis);
  const UnitSystem& u = model.units;
  const SplitGrid g = split_internal(grid, u);
  const double ti = u.time_to_internal(t);
  const std::size_t n_nodes = p.k.size();
  const std::size_t n_modes = model.modes();
  const auto n1 = static_cast<Eigen::Index>(n_modes + 1);
  const std::size_t n_right = g.n - g.n_left;

  std::vector<cdouble> ta(n_nodes);
  for (std::size_t j = 0; j < n_nodes; ++j) ta[j] = p.a[j] * std::polar(1.0, -0.5 * p.k[j] * p.k[j] * ti);

  SectorState state{t, grid, std::vector<std::vector<cdouble>>(n_modes + 1, std::vector<cdouble>(g.n)), p.dropped};
  const double to_si = 1.0 / std::sqrt(u.length_unit());

  // x >= 0: interior mode amplitudes G_mu(x), then rotate to the bare basis.
  if (n_right > 0) {
    Eigen::MatrixXcd G(n1, static_cast<Eigen::Index>(n_right));
    for (Eigen::Index m = 0; m < n1; ++m) {
      Eigen::MatrixXcd C(1, static_cast<Eigen::Index>(n_nodes));
      std::vector<cdouble> kap(n_nodes);
      for (std::size_t j = 0; j < n_nodes; ++j) {
        C(0, static_cast<Eigen::Index>(j)) = ta[j] * p.sol[j].alpha[m];
        kap[j] = p.sol[j].q[m];
      }
      G.row(m) = superpose(C, kap, g.x0_right, g.dx, n_right, options.chunk);
    }
    const Eigen::MatrixXcd F = basis.U * G;
    for (Eigen::Index c = 0; c < n1; ++c)
      for (std::size_t i = 0; i < n_right; ++i)
        state.channels[c][g.n_left + i] = F(c, static_cast<Eigen::Index>(i)) * to_si;
  }
  // x < 0: incident plus reflected waves in each channel.
  if (g.n_left > 0) {
    for (std::size_t c = 0; c <= n_modes; ++c) {
      const std::size_t terms = c == 0 ? 2 * n_nodes : n_nodes;
      Eigen::MatrixXcd C(1, static_cast<Eigen::Index>(terms));
      std::vector<cdouble> kap(terms);
      for (std::size_t j = 0; j < n_nodes; ++j) {
        if (c == 0) {
          C(0, static_cast<Eigen::Index>(2 * j)) = ta[j];
          kap[2 * j] = p.k[j];
          C(0, static_cast<Eigen::Index>(2 * j + 1)) = ta[j] * p.sol[j].R0;
          kap[2 * j + 1] = -p.k[j];
        } else {
          C(0, static_cast<Eigen::Index>(j)) = ta[j] * p.sol[j].R[static_cast<Eigen::Index>(c - 1)];
          kap[j] = -p.sol[j].kch[static_cast<Eigen::Index>(c - 1)];
        }
      }
      const Eigen::MatrixXcd row = superpose(C, kap, g.x0_left, g.dx, g.n_left, options.chunk);
      for (std::size_t i = 0; i < g.n_left; ++i) state.channels[c][i] = row(0, static_cast<Eigen::Index>(i)) * to_si;
    }
  }
  return state;
}

SectorState evolve_packet_discrete(const GaussianPacketSpec& spec, double t, const Grid1D& grid,
                                   const DiscreteModel& model, const DiscreteOptions& options) {
  return evolve_packet_discrete(momentum_samples(spec, options.k_nodes, options.window_sigmas), t,
                                grid, model, options);
}

std::vector<double> centred_derivative(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) return d;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
  d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
  return d;
}

DiscreteDensity detection_density_discrete(const MomentumSamples& samples, const DiscreteModel& model,
                                           const std::vector<double>& t_grid, const Grid1D& grid,
                                           const DiscreteOptions& options) {
  if (t_grid.size() < 3) throw ConfigError("discrete time grid needs at least 3 points");
  const double h = (t_grid.back() - t_grid.front()) / static_cast<double>(t_grid.size() - 1);
  if (!(h > 0.0)) throw ConfigError("discrete time grid must be increasing");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (std::abs(t_grid[i] - (t_grid.front() + h * static_cast<double>(i))) > 1e-9 * h)
      throw ConfigError("discrete time grid must be uniform");

  const InteriorEigenbasis basis = interior_eigenmodes(model);
  const PacketData p = prepare_packet(samples, model, basis);
  const UnitSystem& u = model.units;
  const SplitGrid g = split_internal(grid, u);
  const std::size_t n_nodes = p.k.size();
  const std::size_t n1 = model.modes() + 1;
  const auto nt = static_cast<Eigen::Index>(t_grid.size());

  DiscreteDensity out;
  out.t = t_grid;
  out.recurrence_time = model.recurrence_time;
  out.dropped_nodes = p.dropped;
  if (p.dropped > 0)
    out.warnings.push_back(std::to_string(p.dropped) + " quadrature nodes dropped after failed matching");
  if (t_grid.back() - t_grid.front() > 2.0 * model.recurrence_time)
    out.warnings.push_back("time window exceeds twice the recurrence time");

  std::vector<double> ti(t_grid.size());
  for (std::size_t a = 0; a < ti.size(); ++a) ti[a] = u.time_to_internal(t_grid[a]);

  Eigen::MatrixXcd field(nt, static_cast<Eigen::Index>(g.n));
  if (g.n_left > 0) {
    Eigen::MatrixXcd C(nt, static_cast<Eigen::Index>(2 * n_nodes));
    std::vector<cdouble> kap(2 * n_nodes);
    for (std::size_t j = 0; j < n_nodes; ++j) {
      kap[2 * j] = p.k[j];
      kap[2 * j + 1] = -p.k[j];
      for (Eigen::Index a = 0; a < nt; ++a) {
        const cdouble e = p.a[j] * std::polar(1.0, -0.5 * p.k[j] * p.k[j] * ti[a]);
        C(a, static_cast<Eigen::Index>(2 * j)) = e;
        C(a, static_cast<Eigen::Index>(2 * j + 1)) = e * p.sol[j].R0;
      }
    }
    field.leftCols(static_cast<Eigen::Index>(g.n_left)) =
        superpose(C, kap, g.x0_left, g.dx, g.n_left, options.chunk);
  }
  const std::size_t n_right = g.n - g.n_left;
  if (n_right > 0) {
    std::vector<cdouble> kap;
    std::vector<std::pair<std::size_t, cdouble>> coef;   // node, alpha U_0mu
    for (std::size_t j = 0; j < n_nodes; ++j)
      for (std::size_t m = 0; m < n1; ++m) {
        const cdouble c = p.sol[j].alpha[static_cast<Eigen::Index>(m)] * basis.U(0, static_cast<Eigen::Index>(m));
        if (c == cdouble(0.0, 0.0)) continue;
        kap.push_back(p.sol[j].q[static_cast<Eigen::Index>(m)]);
        coef.emplace_back(j, c);
      }
    Eigen::MatrixXcd C(nt, static_cast<Eigen::Index>(kap.size()));
    std::vector<cdouble> tf(t_grid.size());
    std::size_t last_node = n_nodes;
    for (std::size_t s = 0; s < coef.size(); ++s) {
      const std::size_t j = coef[s].first;
      if (j != last_node) {
        for (std::size_t a = 0; a < tf.size(); ++a) tf[a] = p.a[j] * std::polar(1.0, -0.5 * p.k[j] * p.k[j] * ti[a]);
        last_node = j;
      }
      for (Eigen::Index a = 0; a < nt; ++a) C(a, static_cast<Eigen::Index>(s)) = tf[static_cast<std::size_t>(a)] * coef[s].second;
    }
    field.rightCols(static_cast<Eigen::Index>(n_right)) =
        superpose(C, kap, g.x0_right, g.dx, n_right, options.chunk);
  }

  const std::size_t edge = std::min(g.n / 2, std::max<std::size_t>(16, g.n / 50));
  out.P0.resize(t_grid.size());
  out.P1.resize(t_grid.size());
  std::vector<double> rho(g.n);
  for (Eigen::Index a = 0; a < nt; ++a) {
    for (std::size_t i = 0; i < g.n; ++i) rho[i] = std::norm(field(a, static_cast<Eigen::Index>(i)));
    out.P0[a] = trapezoid(rho, g.dx);
    out.P1[a] = 1.0 - out.P0[a];
    double edge_mass = 0.0;
    for (std::size_t i = 0; i < edge; ++i) edge_mass += (rho[i] + rho[g.n - 1 - i]) * g.dx;
    out.max_edge_mass = std::max(out.max_edge_mass, edge_mass);
  }
  if (out.max_edge_mass > 1e-6)
    out.warnings.push_back("packet mass near the grid edges reached " + std::to_string(out.max_edge_mass));
  out.w1 = centred_derivative(out.P1, h);
  return out;
}

DiscreteDensity detection_density_discrete(const GaussianPacketSpec& spec, const DiscreteModel& model,
                                           const std::vector<double>& t_grid, const Grid1D& grid,
                                           const DiscreteOptions& options) {
  return detection_density_discrete(momentum_samples(spec, options.k_nodes, options.window_sigmas),
                                    model, t_grid, grid, options);
}

}  // namespace arrival
