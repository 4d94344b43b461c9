#include "arrival/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "arrival/errors.hpp"

namespace arrival {

namespace {

void validate_shape(const Sensitivity1D::Shape& shape) {
  if (const auto* iv = std::get_if<IntervalShape>(&shape)) {
    if (!(std::isfinite(iv->lo) && std::isfinite(iv->hi) && iv->lo < iv->hi))
      throw ConfigError("sensitivity interval requires finite lo < hi");
  } else if (const auto* hl = std::get_if<HalfLineShape>(&shape)) {
    if (!std::isfinite(hl->start)) throw ConfigError("sensitivity half_line start must be finite");
  } else {
    const auto& tab = std::get<TabulatedShape>(shape);
    if (tab.x.size() < 2 || tab.x.size() != tab.chi.size())
      throw ConfigError("tabulated sensitivity needs >= 2 points and matching x/chi sizes");
    for (std::size_t i = 1; i < tab.x.size(); ++i)
      if (!(tab.x[i] > tab.x[i - 1]))
        throw ConfigError("tabulated sensitivity x must be strictly increasing");
    for (double c : tab.chi)
      if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("sensitivity chi must lie in [0, 1]");
  }
}

}  // namespace

Sensitivity1D::Sensitivity1D(Shape shape) : shape_(std::move(shape)) { validate_shape(shape_); }

double Sensitivity1D::operator()(double x) const {
  if (const auto* iv = std::get_if<IntervalShape>(&shape_))
    return (x >= iv->lo && x <= iv->hi) ? 1.0 : 0.0;
  if (const auto* hl = std::get_if<HalfLineShape>(&shape_)) return x >= hl->start ? 1.0 : 0.0;
  const auto& tab = std::get<TabulatedShape>(shape_);
  if (x < tab.x.front() || x > tab.x.back()) return 0.0;
  auto it = std::upper_bound(tab.x.begin(), tab.x.end(), x);
  if (it == tab.x.end()) return tab.chi.back();
  const std::size_t i = static_cast<std::size_t>(it - tab.x.begin());
  const double s = (x - tab.x[i - 1]) / (tab.x[i] - tab.x[i - 1]);
  return tab.chi[i - 1] + s * (tab.chi[i] - tab.chi[i - 1]);
}

double Sensitivity1D::region_start() const {
  if (const auto* iv = std::get_if<IntervalShape>(&shape_)) return iv->lo;
  if (const auto* hl = std::get_if<HalfLineShape>(&shape_)) return hl->start;
  return std::get<TabulatedShape>(shape_).x.front();
}

double Sensitivity1D::region_end() const {
  if (const auto* iv = std::get_if<IntervalShape>(&shape_)) return iv->hi;
  if (std::holds_alternative<HalfLineShape>(shape_)) return std::numeric_limits<double>::infinity();
  return std::get<TabulatedShape>(shape_).x.back();
}

Region3D::Region3D(Shape shape) : shape_(shape) {
  if (const auto* b = std::get_if<Ball>(&shape_)) {
    if (!(b->radius >= 0.0)) throw ConfigError("ball radius must be >= 0");
  } else {
    const auto& box = std::get<Box>(shape_);
    for (int d = 0; d < 3; ++d)
      if (!(box.lo[d] <= box.hi[d])) throw ConfigError("box requires lo <= hi componentwise");
  }
}

double Region3D::chi(const Vec3& x) const {
  if (const auto* b = std::get_if<Ball>(&shape_)) {
    double r2 = 0.0;
    for (int d = 0; d < 3; ++d) r2 += (x[d] - b->center[d]) * (x[d] - b->center[d]);
    return r2 <= b->radius * b->radius ? 1.0 : 0.0;
  }
  const auto& box = std::get<Box>(shape_);
  for (int d = 0; d < 3; ++d)
    if (x[d] < box.lo[d] || x[d] > box.hi[d]) return 0.0;
  return 1.0;
}

DetectorGeometry DetectorGeometry::single_spin(double omega0, Sensitivity1D chi) {
  DetectorGeometry g;
  g.sensitivity = std::move(chi);
  g.spins.push_back(Spin{omega0, std::nullopt});
  g.validate();
  return g;
}

void DetectorGeometry::validate() const {
  if (spins.empty()) throw ConfigError("detector needs at least one spin");
  for (std::size_t j = 0; j < spins.size(); ++j)
    if (!(std::isfinite(spins[j].omega0) && spins[j].omega0 > 0.0))
      throw ConfigError("detector.omega0 of spin " + std::to_string(j) + " must be > 0");
  for (const auto& c : couplings) {
    if (c.j >= spins.size() || c.k >= spins.size() || c.j >= c.k)
      throw ConfigError("spin coupling indices must satisfy j < k < number of spins");
    if (!(c.omega_J >= 0.0) || !std::isfinite(c.omega_J))
      throw ConfigError("spin coupling omega_J must be finite and >= 0");
  }
}

}  // namespace arrival
