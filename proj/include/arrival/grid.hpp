#pragma once

#include <cstddef>
#include <vector>

namespace arrival {

// Uniform grid on [x_min, x_max] including both end points.
class Grid1D {
 public:
  Grid1D(double x_min, double x_max, std::size_t n_points);

  // Rejects grids with fewer than `points_per_wavelength` nodes per 2*pi/k.
  Grid1D(double x_min, double x_max, std::size_t n_points, double dominant_wavenumber,
         double points_per_wavelength = 8.0);

  // Smallest uniform grid on [x_min, x_max] whose spacing does not exceed max_spacing.
  static Grid1D with_max_spacing(double x_min, double x_max, double max_spacing);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return n_; }
  double spacing() const { return dx_; }
  double x(std::size_t i) const { return x_min_ + dx_ * static_cast<double>(i); }
  std::vector<double> points() const;

  bool resolves(double wavenumber, double points_per_wavelength = 8.0) const;

  Grid1D scaled(double factor) const;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
  double dx_;
};

}  // namespace arrival
