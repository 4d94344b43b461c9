#include "arrival/packet.hpp"

#include <cmath>
#include <numbers>
#include <string>


#include "arrival/errors.hpp"
#include "arrival/units.hpp"

namespace arrival {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite_positive(double v, const char* field) {
  if (!(std::isfinite(v) && v > 0.0))
    throw ConfigError(std::string("packet.") + field + ": must be finite and > 0");
}

}  // namespace

void GaussianPacketSpec::validate() const {
  require_finite_positive(mass, "mass");
  require_finite_positive(mean_velocity, "mean_velocity");
  require_finite_positive(momentum_width, "momentum_width");
  if (!std::isfinite(focal_position)) throw ConfigError("packet.focal_position: must be finite");
  if (!std::isfinite(focal_time)) throw ConfigError("packet.focal_time: must be finite");
  if (!(mass * mean_velocity / momentum_width > 8.0))
    throw ConfigError(
        "packet.momentum_width: m*v0/dp must exceed 8 so that negative momenta are negligible");
}

double GaussianPacketSpec::central_wavenumber() const { return mass * mean_velocity / kHbar; }
double GaussianPacketSpec::wavenumber_width() const { return momentum_width / kHbar; }
double GaussianPacketSpec::position_width() const { return kHbar / (2.0 * momentum_width); }
double GaussianPacketSpec::velocity_width() const { return momentum_width / mass; }
double GaussianPacketSpec::energy(double k) const { return kHbar * kHbar * k * k / (2.0 * mass); }

cdouble momentum_amplitude(const GaussianPacketSpec& spec, double k) {
  if (!std::isfinite(k)) throw ConfigError("momentum_amplitude: wavenumber must be finite");
  if (!(spec.momentum_width > 0.0)) throw ConfigError("packet.momentum_width: must be > 0");
  const double dk = spec.wavenumber_width();
  const double u = k - spec.central_wavenumber();
  const double magnitude =
      std::sqrt(1.0 / (dk * std::sqrt(2.0 * kPi))) * std::exp(-u * u / (4.0 * dk * dk));
  if (spec.focal_position == 0.0 && spec.focal_time == 0.0) return {magnitude, 0.0};
  const double phase = -k * spec.focal_position + spec.energy(k) * spec.focal_time / kHbar;
  return std::polar(magnitude, phase);
}

std::vector<cdouble> free_evolved_packet(const GaussianPacketSpec& spec, double t,
                                         const Grid1D& grid) {
  spec.validate();
  const double k0 = spec.central_wavenumber();
  const double dk = spec.wavenumber_width();
  if (!(grid.spacing() < kPi / (k0 + 8.0 * dk)))
    throw ConfigError("grid spacing does not resolve the packet (need dx < pi/(k0 + 8 dp/hbar))");

  const double tau = t - spec.focal_time;
  const double beta = kHbar * tau / (2.0 * spec.mass);
  const cdouble s(1.0 / (4.0 * dk * dk), beta);
  const double norm = std::sqrt(1.0 / (dk * std::sqrt(2.0 * kPi)));
  const cdouble prefactor = norm / std::sqrt(2.0 * kPi) * std::sqrt(kPi / s);
  const double v0 = spec.mean_velocity;

  std::vector<cdouble> psi(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid.x(i) - spec.focal_position;
    const double b = y - v0 * tau;
    const cdouble exponent = -b * b / (4.0 * s) + cdouble(0.0, k0 * y - beta * k0 * k0);
    psi[i] = prefactor * std::exp(exponent);
  }
  return psi;
}

double packet_center_at(const GaussianPacketSpec& spec, double t) {
  return spec.focal_position + spec.mean_velocity * (t - spec.focal_time);
}

double packet_width_at(const GaussianPacketSpec& spec, double t) {
  const double dx = spec.position_width();
  const double r = kHbar * (t - spec.focal_time) / (2.0 * spec.mass * dx * dx);
  return dx * std::sqrt(1.0 + r * r);
}

double probability_beyond(const GaussianPacketSpec& spec, double t, double x0) {
  const double z = (x0 - packet_center_at(spec, t)) / (std::sqrt(2.0) * packet_width_at(spec, t));
  return 0.5 * std::erfc(z);
}

double start_time_for_overlap(const GaussianPacketSpec& spec, double region_start,
                              double max_overlap) {
  spec.validate();
  if (!(max_overlap > 0.0 && max_overlap < 0.5))
    throw ConfigError("start-time overlap tolerance must lie in (0, 0.5)");
  auto overlap = [&](double t) { return probability_beyond(spec, t, region_start); };
  double hi = spec.focal_time;
  if (overlap(hi) <= max_overlap) {
    // Already clear of the region at focus: walk forward is not meaningful, use focus.
    return hi;
  }
  const double scale = spec.position_width() / spec.mean_velocity;
  double step = scale;
  double lo = hi - step;
  int guard = 0;
  while (overlap(lo) > max_overlap) {
    hi = lo;
    step *= 2.0;
    lo = hi - step;
    if (++guard > 200) throw NumericalError("could not find a start time clear of the detector");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    (overlap(mid) > max_overlap ? hi : lo) = mid;
  }
  return lo;
}

double MomentumSamples::norm() const {
  double s = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) s += weight[j] * std::norm(amplitude[j]);
  return s;
}

namespace {

std::vector<double> trapezoid_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace

MomentumSamples momentum_samples(const GaussianPacketSpec& spec, std::size_t n_nodes,
                                 double window_sigmas) {
  spec.validate();
  if (n_nodes < 3) throw ConfigError("discrete.k_nodes: need at least 3 nodes");
  if (!(window_sigmas > 0.0)) throw ConfigError("discrete.window_sigmas: must be > 0");
  const double k0 = spec.central_wavenumber();
  const double dk = spec.wavenumber_width();
  const double lo = k0 - window_sigmas * dk;
  const double hi = k0 + window_sigmas * dk;
  if (!(lo > 0.0)) throw ConfigError("momentum window reaches k <= 0; reduce k_window_sigmas");
  const double h = (hi - lo) / static_cast<double>(n_nodes - 1);
  MomentumSamples out;
  out.mass = spec.mass;
  out.k.resize(n_nodes);
  out.amplitude.resize(n_nodes);
  out.weight = trapezoid_weights(n_nodes, h);
  for (std::size_t j = 0; j < n_nodes; ++j) {
    out.k[j] = lo + h * static_cast<double>(j);
    out.amplitude[j] = momentum_amplitude(spec, out.k[j]);
  }
  return out;
}

MomentumSamples tabulated_momentum_samples(const std::vector<double>& k,
                                           const std::vector<cdouble>& amplitude, double mass,
                                           std::size_t n_nodes) {
  if (k.size() < 2 || k.size() != amplitude.size())
    throw ConfigError("tabulated amplitude needs >= 2 points and matching sizes");
  if (!(k.front() > 0.0)) throw ConfigError("tabulated amplitude must use k > 0 only");
  for (std::size_t i = 1; i < k.size(); ++i)
    if (!(k[i] > k[i - 1])) throw ConfigError("tabulated k must be strictly increasing");
  if (!(mass > 0.0)) throw ConfigError("tabulated packet mass must be > 0");
  if (n_nodes < 3) throw ConfigError("tabulated packet needs at least 3 quadrature nodes");
  const double h = (k.back() - k.front()) / static_cast<double>(n_nodes - 1);
  MomentumSamples out;
  out.mass = mass;
  out.k.resize(n_nodes);
  out.amplitude.resize(n_nodes);
  out.weight = trapezoid_weights(n_nodes, h);
  std::size_t seg = 1;
  for (std::size_t j = 0; j < n_nodes; ++j) {
    const double kj = j + 1 == n_nodes ? k.back() : k.front() + h * static_cast<double>(j);
    while (seg + 1 < k.size() && kj > k[seg]) ++seg;
    const double s = (kj - k[seg - 1]) / (k[seg] - k[seg - 1]);
    out.k[j] = kj;
    out.amplitude[j] = amplitude[seg - 1] + s * (amplitude[seg] - amplitude[seg - 1]);
  }
  return out;
}

std::vector<cdouble> synthesize_free_packet(const MomentumSamples& samples, double t,
                                            const Grid1D& grid) {
  std::vector<cdouble> psi(grid.size(), cdouble(0.0, 0.0));
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const double k = samples.k[j];
    const double energy_phase = kHbar * k * k / (2.0 * samples.mass) * t;
    const cdouble c = samples.weight[j] * inv_sqrt_2pi * samples.amplitude[j] *
                      std::polar(1.0, -energy_phase);
    // Phase recurrence across the uniform grid.
    const cdouble step = std::polar(1.0, k * grid.spacing());
    cdouble phase = std::polar(1.0, k * grid.x_min());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if ((i & 255u) == 0) phase = std::polar(1.0, k * grid.x(i));
      psi[i] += c * phase;
      phase *= step;
    }
  }
  return psi;
}

}  // namespace arrival
