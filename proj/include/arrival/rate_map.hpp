#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "arrival/bath.hpp"
#include "arrival/geometry.hpp"
#include "arrival/grid.hpp"

namespace arrival {

// A(x) and shift(x) in s^-1 at sample points (1D maps use y = z = 0).
struct RateMap {
  int dimension = 1;
  std::vector<Vec3> points;
  std::vector<double> A;
  std::vector<double> shift;

  std::size_t size() const { return points.size(); }
  void validate() const;
  // Columns x[,y,z],A,delta_shift.
  void write_csv(std::ostream& out) const;
};

RateMap rate_map_1d(double A, double shift, const Sensitivity1D& chi, const Grid1D& grid);

// Gamma^(j)(omega, e) for a unit direction e.
using DirectionalCoupling = std::function<cdouble(double omega, const Vec3& direction)>;

struct SpinBathCoupling {
  std::shared_ptr<const DirectionalCoupling> enhanced;
  std::shared_ptr<const DirectionalCoupling> spontaneous;   // may be null
  double scale = 1.0;                                       // Gamma -> scale * Gamma
};

struct Bath3D {
  Dispersion dispersion = Dispersion::constant(1.0);
  double cutoff = 0.0;               // upper limit of the shift integral, s^-1
  std::vector<SpinBathCoupling> per_spin;
};

std::vector<double> modified_frequencies(const DetectorGeometry& geometry);

// int dOmega_e F(e) by Gauss-Legendre in cos(theta) times trapezoid in phi.
double solid_angle_integral(const std::function<double(const Vec3&)>& integrand,
                            unsigned n_theta = 32, unsigned n_phi = 64);

struct RateMap3DOptions {
  bool include_shift = true;
  double min_enhancement = 100.0;   // |Gamma|^2 / |Gamma_spon|^2 lower bound
  unsigned n_theta = 32;
  unsigned n_phi = 64;
};

RateMap rate_map_3d(const DetectorGeometry& geometry, const Bath3D& bath,
                    const std::vector<Vec3>& points, const RateMap3DOptions& options = {});

// N co-located spins sharing one region, each with the same modified frequency
// omega_tilde (ring of ferromagnetic couplings carrying load_per_spin), and
// couplings scaled by N^-exponent.
struct EnsembleSpec {
  std::size_t spins = 1;
  double omega_tilde = 0.0;
  double load_per_spin = 0.0;
  Region3D region = Region3D(Ball{});
  SpinBathCoupling coupling;
  double exponent = 0.5;
};

struct Ensemble {
  DetectorGeometry geometry;
  Bath3D bath;
};

Ensemble build_ensemble(const EnsembleSpec& spec, const Dispersion& dispersion, double cutoff);

RateMap scaled_ensemble(const EnsembleSpec& spec, const Dispersion& dispersion, double cutoff,
                        const std::vector<Vec3>& points, const RateMap3DOptions& options = {});

}  // namespace arrival
