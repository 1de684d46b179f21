#include "ionlab/core.hpp"

#include <cmath>
#include <stdexcept>

namespace ionlab {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

TrapConfig::TrapConfig(double omega_a, double omega_r, double mass,
                       double drift_fraction)
    : omega_a_(omega_a),
      omega_r_(omega_r),
      mass_(mass),
      drift_fraction_(drift_fraction) {
  require(std::isfinite(omega_a) && omega_a > 0.0,
          "TrapConfig: omega_a must be finite and > 0");
  require(std::isfinite(omega_r) && omega_r > 0.0,
          "TrapConfig: omega_r must be finite and > 0");
  require(std::isfinite(mass) && mass > 0.0,
          "TrapConfig: mass must be finite and > 0");
  require(std::isfinite(drift_fraction),
          "TrapConfig: drift_fraction must be finite");
}

DetectionLaser::DetectionLaser(double wavelength, double linewidth,
                               double detuning, double saturation,
                               int direction)
    : wavelength_(wavelength),
      linewidth_(linewidth),
      detuning_(detuning),
      saturation_(saturation),
      direction_(direction) {
  require(std::isfinite(wavelength) && wavelength > 0.0,
          "DetectionLaser: wavelength must be finite and > 0");
  require(std::isfinite(linewidth) && linewidth > 0.0,
          "DetectionLaser: linewidth must be finite and > 0");
  require(std::isfinite(detuning), "DetectionLaser: detuning must be finite");
  require(std::isfinite(saturation) && saturation >= 0.0,
          "DetectionLaser: saturation must be finite and >= 0");
  require(direction == 1 || direction == -1,
          "DetectionLaser: direction must be +1 or -1");
}

DisplacementPulse::DisplacementPulse(double x_d, double tau)
    : x_d_(x_d), tau_(tau) {
  require(std::isfinite(x_d) && x_d >= 0.0,
          "DisplacementPulse: x_d must be finite and >= 0");
  require(std::isfinite(tau) && tau >= 0.0,
          "DisplacementPulse: tau must be finite and >= 0");
}

double doppler_limit_temperature(const DetectionLaser& laser) {
  return kHbar * laser.linewidth() / (2.0 * kBoltzmann);
}

}  // namespace ionlab
