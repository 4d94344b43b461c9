#include "arrival/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "arrival/errors.hpp"

namespace arrival {

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min), x_max_(x_max), n_(n_points) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max)))
    throw ConfigError("grid bounds must be finite");
  if (!(x_min < x_max)) throw ConfigError("grid requires x_min < x_max");
  if (n_points < 2) throw ConfigError("grid requires at least 2 points");
  dx_ = (x_max - x_min) / static_cast<double>(n_points - 1);
}

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_points, double dominant_wavenumber,
               double points_per_wavelength)
    : Grid1D(x_min, x_max, n_points) {
  if (!resolves(dominant_wavenumber, points_per_wavelength)) {
    throw ConfigError("grid spacing " + std::to_string(dx_) + " does not resolve wavenumber " +
                      std::to_string(dominant_wavenumber) + " with " +
                      std::to_string(points_per_wavelength) + " points per wavelength");
  }
}

Grid1D Grid1D::with_max_spacing(double x_min, double x_max, double max_spacing) {
  if (!(max_spacing > 0.0)) throw ConfigError("grid spacing must be > 0");
  if (!(x_min < x_max)) throw ConfigError("grid requires x_min < x_max");
  const double cells = std::ceil((x_max - x_min) / max_spacing * (1.0 - 1e-12));
  return Grid1D(x_min, x_max, static_cast<std::size_t>(cells) + 1);
}

std::vector<double> Grid1D::points() const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = x(i);
  return out;
}

bool Grid1D::resolves(double wavenumber, double points_per_wavelength) const {
  const double k = std::abs(wavenumber);
  if (k == 0.0) return true;
  return dx_ * points_per_wavelength <= 2.0 * std::numbers::pi / k;
}

Grid1D Grid1D::scaled(double factor) const {
  return Grid1D(x_min_ * factor, x_max_ * factor, n_);
}

}  // namespace arrival
