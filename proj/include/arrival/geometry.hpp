#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

namespace arrival {

// Detector sensitivity chi(x) in 1D.
struct IntervalShape {
  double lo = 0.0;
  double hi = 0.0;
};
struct HalfLineShape {
  double start = 0.0;
};
// Piecewise linear, zero outside [x.front(), x.back()].
struct TabulatedShape {
  std::vector<double> x;
  std::vector<double> chi;
};

class Sensitivity1D {
 public:
  using Shape = std::variant<IntervalShape, HalfLineShape, TabulatedShape>;

  Sensitivity1D() : Sensitivity1D(HalfLineShape{}) {}
  explicit Sensitivity1D(Shape shape);

  static Sensitivity1D interval(double lo, double hi) { return Sensitivity1D(IntervalShape{lo, hi}); }
  static Sensitivity1D half_line(double start = 0.0) { return Sensitivity1D(HalfLineShape{start}); }
  static Sensitivity1D tabulated(std::vector<double> x, std::vector<double> chi) {
    return Sensitivity1D(TabulatedShape{std::move(x), std::move(chi)});
  }

  double operator()(double x) const;
  double region_start() const;
  // +infinity for a half line.
  double region_end() const;
  bool is_half_line() const { return std::holds_alternative<HalfLineShape>(shape_); }
  const Shape& shape() const { return shape_; }

 private:
  Shape shape_;
};

using Vec3 = std::array<double, 3>;

struct Ball {
  Vec3 center{};
  double radius = 0.0;
};
struct Box {
  Vec3 lo{};
  Vec3 hi{};
};

// Spin region G_j with indicator sensitivity.
class Region3D {
 public:
  using Shape = std::variant<Ball, Box>;
  explicit Region3D(Shape shape);
  double chi(const Vec3& x) const;
  const Shape& shape() const { return shape_; }

 private:
  Shape shape_;
};

struct Spin {
  double omega0 = 0.0;               // s^-1
  std::optional<Region3D> region;    // 3D only
};

// Ferromagnetic coupling omega_J^(jk) between spins j < k.
struct SpinCoupling {
  std::size_t j = 0;
  std::size_t k = 0;
  double omega_J = 0.0;
};

struct DetectorGeometry {
  Sensitivity1D sensitivity;
  std::vector<Spin> spins;
  std::vector<SpinCoupling> couplings;

  static DetectorGeometry single_spin(double omega0, Sensitivity1D chi = Sensitivity1D::half_line());
  void validate() const;
};

}  // namespace arrival
