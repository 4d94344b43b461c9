#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "arrival/errors.hpp"
#include "arrival/rate_map.hpp"

using namespace arrival;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kW = 1e8;       // spin frequency, s^-1
constexpr double kC = 1e3;       // boson speed, m/s
constexpr double kGamma2 = 1e-6;

std::shared_ptr<const DirectionalCoupling> isotropic(double gamma2) {
  const double g = std::sqrt(gamma2);
  return std::make_shared<const DirectionalCoupling>([g](double, const Vec3&) { return cdouble(0.0, -g); });
}

std::shared_ptr<const DirectionalCoupling> dipole(double gamma2) {
  const double g = std::sqrt(gamma2);
  return std::make_shared<const DirectionalCoupling>(
      [g](double, const Vec3& e) { return cdouble(g * std::sqrt(1.0 - e[2] * e[2]), 0.0); });
}

DetectorGeometry ball_spin(double omega0, Vec3 centre, double radius) {
  DetectorGeometry g;
  g.spins.push_back(Spin{omega0, Region3D(Ball{centre, radius})});
  return g;
}

}  // namespace

TEST_CASE("modified frequencies") {
  DetectorGeometry g;
  g.spins = {Spin{5.0, std::nullopt}};
  CHECK(modified_frequencies(g)[0] == 5.0);
  g.spins = {Spin{5.0, std::nullopt}, Spin{5.0, std::nullopt}};
  g.couplings = {{0, 1, 0.5}};
  CHECK(modified_frequencies(g) == std::vector<double>{4.5, 4.5});
  g.spins.push_back(Spin{5.0, std::nullopt});
  g.couplings = {{0, 1, 0.5}, {1, 2, 0.5}};
  CHECK(modified_frequencies(g) == std::vector<double>{4.5, 4.0, 4.5});
}

TEST_CASE("solid angle quadrature on smooth integrands") {
  CHECK(solid_angle_integral([](const Vec3&) { return 1.0; }) == doctest::Approx(4 * kPi).epsilon(1e-14));
  // int sin^2 theta dOmega = 8 pi / 3; int (x^4) dOmega = 4 pi / 5.
  CHECK(std::abs(solid_angle_integral([](const Vec3& e) { return 1 - e[2] * e[2]; }) / (8 * kPi / 3) - 1) < 1e-12);
  CHECK(std::abs(solid_angle_integral([](const Vec3& e) { return std::pow(e[0], 4); }) / (4 * kPi / 5) - 1) < 1e-12);
  // Smooth non-polynomial: exp(z) integrates to 4 pi sinh(1).
  CHECK(std::abs(solid_angle_integral([](const Vec3& e) { return std::exp(e[2]); }) / (4 * kPi * std::sinh(1.0)) - 1) < 1e-8);
}

TEST_CASE("single isotropic spin rate inside and outside its region") {
  DetectorGeometry g = ball_spin(kW, {0, 0, 0}, 1e-6);
  Bath3D bath;
  bath.dispersion = Dispersion::constant(kC);
  bath.cutoff = 4 * kW;
  bath.per_spin = {SpinBathCoupling{isotropic(kGamma2), nullptr, 1.0}};
  RateMap3DOptions opt;
  opt.include_shift = false;
  const RateMap m = rate_map_3d(g, bath, {{0, 0, 0}, {2e-6, 0, 0}}, opt);
  const double expected = kW * kW * kW / (kPi * std::pow(kC, 3)) * kGamma2;
  CHECK(m.A[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.A[1] == 0.0);
  CHECK(m.shift[0] == 0.0);
}

TEST_CASE("shift follows the principal-value formula") {
  DetectorGeometry g = ball_spin(kW, {0, 0, 0}, 1e-6);
  Bath3D bath;
  bath.dispersion = Dispersion::constant(kC);
  const double wc = 3 * kW;
  bath.cutoff = wc;
  bath.per_spin = {SpinBathCoupling{isotropic(kGamma2), nullptr, 1.0}};
  const RateMap m = rate_map_3d(g, bath, {{0, 0, 0}});
  // A(w) = b w^3 with b = Gamma^2/(pi c^4): PV int w^3/(w - w0) in closed form.
  const double b = kGamma2 / (kPi * std::pow(kC, 3));
  const double w0 = kW;
  const double pv = wc * wc * wc / 3 + w0 * wc * wc / 2 + w0 * w0 * wc + w0 * w0 * w0 * std::log((wc - w0) / w0);
  CHECK(m.shift[0] == doctest::Approx(-b * pv / kPi).epsilon(1e-9));
}

TEST_CASE("spontaneous floor, additivity and enhancement check") {
  Bath3D bath;
  bath.dispersion = Dispersion::constant(kC);
  bath.cutoff = 4 * kW;
  RateMap3DOptions opt;
  const auto enh = dipole(kGamma2);
  const auto spon = isotropic(kGamma2 / 500);
  DetectorGeometry one = ball_spin(kW, {0, 0, 0}, 1e-6);
  bath.per_spin = {SpinBathCoupling{enh, spon, 1.0}};
  const std::vector<Vec3> pts{{0, 0, 0}, {5e-6, 0, 0}, {1e-6 + 1.5e-6, 0, 0}};
  const RateMap a = rate_map_3d(one, bath, pts, opt);
  const double floor = kW * kW * kW / (kPi * std::pow(kC, 3)) * kGamma2 / 500;
  CHECK(a.A[1] == doctest::Approx(floor).epsilon(1e-12));
  CHECK(a.A[0] > a.A[1]);

  DetectorGeometry two = one;
  two.spins.push_back(Spin{0.9 * kW, Region3D(Ball{{2e-6, 0, 0}, 1e-6})});
  DetectorGeometry second;
  second.spins = {two.spins[1]};
  Bath3D bath2 = bath;
  bath2.per_spin = {bath.per_spin[0], bath.per_spin[0]};
  const RateMap both = rate_map_3d(two, bath2, pts, opt);
  const RateMap b = rate_map_3d(second, bath, pts, opt);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(both.A[i] == doctest::Approx(a.A[i] + b.A[i]).epsilon(1e-13));
    CHECK(both.shift[i] == doctest::Approx(a.shift[i] + b.shift[i]).epsilon(1e-13));
  }

  bath.per_spin = {SpinBathCoupling{enh, isotropic(kGamma2 / 50), 1.0}};
  CHECK_THROWS_AS(rate_map_3d(one, bath, pts, opt), ConfigError);
}

TEST_CASE("ensemble scaling law") {
  EnsembleSpec spec;
  spec.omega_tilde = kW;
  spec.load_per_spin = 0.1 * kW;
  spec.region = Region3D(Box{{-1e-6, -1e-6, -1e-6}, {1e-6, 1e-6, 1e-6}});
  spec.coupling = SpinBathCoupling{dipole(kGamma2), nullptr, 1.0};
  const Dispersion d = Dispersion::constant(kC);
  const std::vector<Vec3> pts{{0, 0, 0}, {0.5e-6, 0.2e-6, 0}, {3e-6, 0, 0}};

  // Every spin carries the same modified frequency.
  spec.spins = 7;
  const Ensemble e = build_ensemble(spec, d, 4 * kW);
  for (double w : modified_frequencies(e.geometry)) CHECK(w == doctest::Approx(kW).epsilon(1e-15));

  spec.spins = 1;
  const RateMap base = scaled_ensemble(spec, d, 4 * kW, pts);
  spec.spins = 100;
  const RateMap hundred = scaled_ensemble(spec, d, 4 * kW, pts);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(hundred.A[i] / base.A[i] - 1) < 1e-12);
    CHECK(std::abs(hundred.shift[i] / base.shift[i] - 1) < 1e-12);
  }
  CHECK(hundred.A[2] == 0.0);

  spec.exponent = 0.0;
  spec.spins = 10;
  const RateMap ten = scaled_ensemble(spec, d, 4 * kW, pts);
  CHECK(std::abs(ten.A[0] / base.A[0] - 10) < 1e-12);

  spec.exponent = 1.0;
  spec.spins = 1'000'000;
  const RateMap big = scaled_ensemble(spec, d, 4 * kW, pts);
  CHECK(big.A[0] < 1e-5 * base.A[0]);
  CHECK(big.A[0] == doctest::Approx(1e-6 * base.A[0]).epsilon(1e-9));
}

TEST_CASE("1D rate map and CSV") {
  const Grid1D grid(-1.0, 1.0, 5);
  const RateMap m = rate_map_1d(2.0, -3.0, Sensitivity1D::half_line(), grid);
  CHECK(m.A == std::vector<double>{0, 0, 2, 2, 2});
  CHECK(m.shift[4] == -3.0);
  std::ostringstream os;
  m.write_csv(os);
  CHECK(os.str().rfind("x,A,delta_shift\n-1,0,0\n-0.5,0,0\n0,2,-3\n", 0) == 0);
  CHECK_THROWS_AS(rate_map_1d(-1.0, 0.0, Sensitivity1D::half_line(), grid), ConfigError);
}
