#include "arrival/units.hpp"

#include <cmath>

#include "arrival/errors.hpp"

namespace arrival {

UnitSystem::UnitSystem(double reference_frequency, double particle_mass)
    : omega_(reference_frequency), mass_(particle_mass) {
  if (!(std::isfinite(omega_) && omega_ > 0.0))
    throw ConfigError("reference_frequency must be finite and > 0");
  if (!(std::isfinite(mass_) && mass_ > 0.0))
    throw ConfigError("particle_mass must be finite and > 0");
  t0_ = 1.0 / omega_;
  l0_ = std::sqrt(kHbar / (mass_ * omega_));
  sqrt_l0_ = std::sqrt(l0_);
}

}  // namespace arrival
