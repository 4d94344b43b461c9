#include "arrival/rate_map.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <tuple>

#include "arrival/csv.hpp"
#include "arrival/errors.hpp"
#include "arrival/quadrature.hpp"

namespace arrival {

namespace {

constexpr double kPi = std::numbers::pi;

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
    else carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

void RateMap::validate() const {
  if (dimension != 1 && dimension != 3) throw ConfigError("rate map dimension must be 1 or 3");
  if (A.size() != points.size() || shift.size() != points.size())
    throw ConfigError("rate map fields must match the number of sample points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(A[i]) || !std::isfinite(shift[i])) throw NumericalError("rate map has non-finite entries");
    if (A[i] < 0.0) throw NumericalError("rate map has negative decay rate");
  }
}

void RateMap::write_csv(std::ostream& out) const {
  std::vector<std::string> header =
      dimension == 1 ? std::vector<std::string>{"x", "A", "delta_shift"}
                     : std::vector<std::string>{"x", "y", "z", "A", "delta_shift"};
  CsvWriter csv(out, header);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (dimension == 1) csv.row({points[i][0], A[i], shift[i]});
    else csv.row({points[i][0], points[i][1], points[i][2], A[i], shift[i]});
  }
}

RateMap rate_map_1d(double A, double shift, const Sensitivity1D& chi, const Grid1D& grid) {
  if (!(A >= 0.0) || !std::isfinite(A)) throw ConfigError("decay rate A must be finite and >= 0");
  if (!std::isfinite(shift)) throw ConfigError("shift must be finite");
  RateMap map;
  map.dimension = 1;
  map.points.resize(grid.size());
  map.A.resize(grid.size());
  map.shift.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.x(i);
    const double c = chi(x);
    map.points[i] = {x, 0.0, 0.0};
    map.A[i] = c == 0.0 ? 0.0 : A * c * c;
    map.shift[i] = c == 0.0 ? 0.0 : shift * c * c;
  }
  return map;
}

std::vector<double> modified_frequencies(const DetectorGeometry& geometry) {
  geometry.validate();
  std::vector<double> w(geometry.spins.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = geometry.spins[j].omega0;
  for (const auto& c : geometry.couplings) {
    w[c.j] -= c.omega_J;
    w[c.k] -= c.omega_J;
  }
  return w;
}

double solid_angle_integral(const std::function<double(const Vec3&)>& integrand, unsigned n_theta,
                            unsigned n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ConfigError("solid-angle quadrature needs at least one node");
  const QuadratureRule& rule = gauss_legendre(n_theta);
  const double dphi = 2.0 * kPi / static_cast<double>(n_phi);
  double total = 0.0;
  for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
    const double u = rule.nodes[a];
    const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    double ring = 0.0;
    for (unsigned b = 0; b < n_phi; ++b) {
      const double phi = dphi * static_cast<double>(b);
      ring += integrand(Vec3{s * std::cos(phi), s * std::sin(phi), u});
    }
    total += rule.weights[a] * ring * dphi;
  }
  return total;
}

namespace {

// omega^3 (c - omega c')/c^4 int dOmega/(2pi)^2 |Gamma(omega, e)|^2.
double directional_rate(const DirectionalCoupling& gamma, const Dispersion& dispersion,
                        double omega, const RateMap3DOptions& opt) {
  if (omega <= 0.0) return 0.0;
  const double angular = solid_angle_integral(
      [&](const Vec3& e) { return std::norm(gamma(omega, e)); }, opt.n_theta, opt.n_phi);
  return omega * omega * omega * dispersion.density_factor_3d(omega) * angular /
         (4.0 * kPi * kPi);
}

struct SpinRates {
  double enhanced = 0.0;
  double spontaneous = 0.0;
  double shift = 0.0;
};

}  // namespace

RateMap rate_map_3d(const DetectorGeometry& geometry, const Bath3D& bath,
                    const std::vector<Vec3>& points, const RateMap3DOptions& options) {
  geometry.validate();
  const std::size_t n_spins = geometry.spins.size();
  if (bath.per_spin.size() != n_spins)
    throw ConfigError("3D bath needs one coupling profile per spin");
  for (std::size_t j = 0; j < n_spins; ++j) {
    if (!geometry.spins[j].region) throw ConfigError("spin " + std::to_string(j) + " has no region");
    if (!bath.per_spin[j].enhanced) throw ConfigError("spin " + std::to_string(j) + " has no coupling profile");
  }
  if (options.include_shift && !(bath.cutoff > 0.0))
    throw ConfigError("3D bath cutoff must be > 0 when the shift is requested");

  const std::vector<double> omega = modified_frequencies(geometry);
  std::map<std::tuple<const void*, const void*, double>, SpinRates> cache;
  std::vector<const SpinRates*> per_spin(n_spins);
  for (std::size_t j = 0; j < n_spins; ++j) {
    const SpinBathCoupling& c = bath.per_spin[j];
    const auto key = std::make_tuple(static_cast<const void*>(c.enhanced.get()),
                                     static_cast<const void*>(c.spontaneous.get()), omega[j]);
    auto it = cache.find(key);
    if (it == cache.end()) {
      SpinRates r;
      r.enhanced = directional_rate(*c.enhanced, bath.dispersion, omega[j], options);
      if (c.spontaneous) {
        r.spontaneous = directional_rate(*c.spontaneous, bath.dispersion, omega[j], options);
        if (r.enhanced < options.min_enhancement * r.spontaneous)
          throw ConfigError("spin " + std::to_string(j) +
                            ": enhanced coupling must dominate the spontaneous one by a factor >= " +
                            std::to_string(options.min_enhancement));
      }
      if (options.include_shift) {
        const DirectionalCoupling& g = *c.enhanced;
        r.shift = principal_value_shift(
            [&](double w) { return directional_rate(g, bath.dispersion, w, options); }, omega[j],
            bath.cutoff);
      }
      it = cache.emplace(key, r).first;
    }
    per_spin[j] = &it->second;
  }

  RateMap map;
  map.dimension = 3;
  map.points = points;
  map.A.assign(points.size(), 0.0);
  map.shift.assign(points.size(), 0.0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    CompensatedSum a;
    CompensatedSum d;
    for (std::size_t j = 0; j < n_spins; ++j) {
      const double s2 = bath.per_spin[j].scale * bath.per_spin[j].scale;
      const double chi = geometry.spins[j].region->chi(points[p]);
      const SpinRates& r = *per_spin[j];
      const bool has_spon = static_cast<bool>(bath.per_spin[j].spontaneous);
      a.add(s2 * (r.enhanced * chi * chi + (has_spon ? r.spontaneous : 0.0)));
      d.add(s2 * r.shift * chi * chi);
    }
    map.A[p] = a.value();
    map.shift[p] = d.value();
  }
  map.validate();
  return map;
}

Ensemble build_ensemble(const EnsembleSpec& spec, const Dispersion& dispersion, double cutoff) {
  if (spec.spins < 1) throw ConfigError("ensemble needs at least one spin");
  if (!(spec.omega_tilde > 0.0)) throw ConfigError("ensemble omega_tilde must be > 0");
  if (!(spec.load_per_spin >= 0.0)) throw ConfigError("ensemble load_per_spin must be >= 0");
  if (!spec.coupling.enhanced) throw ConfigError("ensemble needs a coupling profile");
  const std::size_t n = spec.spins;
  Ensemble e;
  e.bath.dispersion = dispersion;
  e.bath.cutoff = cutoff;
  const double bare = n == 1 ? spec.omega_tilde : spec.omega_tilde + spec.load_per_spin;
  e.geometry.spins.assign(n, Spin{bare, spec.region});
  if (n == 2 && spec.load_per_spin > 0.0) {
    e.geometry.couplings.push_back({0, 1, spec.load_per_spin});
  } else if (n >= 3 && spec.load_per_spin > 0.0) {
    const double j = 0.5 * spec.load_per_spin;
    e.geometry.couplings.reserve(n);
    for (std::size_t i = 0; i + 1 < n; ++i) e.geometry.couplings.push_back({i, i + 1, j});
    e.geometry.couplings.push_back({0, n - 1, j});
  }
  SpinBathCoupling c = spec.coupling;
  c.scale *= std::pow(static_cast<double>(n), -spec.exponent);
  e.bath.per_spin.assign(n, c);
  return e;
}

RateMap scaled_ensemble(const EnsembleSpec& spec, const Dispersion& dispersion, double cutoff,
                        const std::vector<Vec3>& points, const RateMap3DOptions& options) {
  const Ensemble e = build_ensemble(spec, dispersion, cutoff);
  return rate_map_3d(e.geometry, e.bath, points, options);
}

}  // namespace arrival
