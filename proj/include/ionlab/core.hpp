#pragma once

#include <cmath>

#include "ionlab/constants.hpp"

// Validated physical configuration types shared by the simulation, model,
// and fitting layers. All frequencies are stored as angular frequencies
// (rad/s); the JSON/CLI boundary converts from ordinary MHz. All types are
// immutable after construction.

namespace ionlab {

// Harmonic trap along the axial direction. The radial frequency is carried
// for bookkeeping only; the dynamics are one-dimensional.
class TrapConfig {
 public:
  // omega_a, omega_r in rad/s; mass in kg; drift_fraction is the relative
  // omega_a drift across one accumulation run.
  TrapConfig(double omega_a, double omega_r, double mass,
             double drift_fraction = 0.0);

  double omega_a() const { return omega_a_; }
  double omega_r() const { return omega_r_; }
  double mass() const { return mass_; }
  double drift_fraction() const { return drift_fraction_; }

  double period() const { return kTwoPi / omega_a_; }

  // Copy with a different axial frequency (used by the per-sequence drift).
  TrapConfig with_omega_a(double omega_a) const {
    return TrapConfig(omega_a, omega_r_, mass_, drift_fraction_);
  }

 private:
  double omega_a_;
  double omega_r_;
  double mass_;
  double drift_fraction_;
};

// Detection/cooling laser on the axial beam. Detuning is angular and signed;
// red detuning is negative. direction is the beam's propagation sign along
// the trap axis.
class DetectionLaser {
 public:
  DetectionLaser(double wavelength, double linewidth, double detuning,
                 double saturation, int direction);

  double wavelength() const { return wavelength_; }
  double linewidth() const { return linewidth_; }
  double detuning() const { return detuning_; }
  double saturation() const { return saturation_; }
  int direction() const { return direction_; }

  double wavenumber() const { return kTwoPi / wavelength_; }

  // Scattering rate when the effective detuning vanishes: (Gamma/2) s/(1+s).
  // Upper bound of the rate for any velocity.
  double saturated_rate() const {
    return 0.5 * linewidth_ * saturation_ / (1.0 + saturation_);
  }

 private:
  double wavelength_;
  double linewidth_;
  double detuning_;
  double saturation_;
  int direction_;
};

// Square trap-center displacement pulse, idealized with instantaneous edges.
class DisplacementPulse {
 public:
  DisplacementPulse() : x_d_(0.0), tau_(0.0) {}
  DisplacementPulse(double x_d, double tau);

  double x_d() const { return x_d_; }
  double tau() const { return tau_; }

 private:
  double x_d_;
  double tau_;
};

// Instantaneous 1-D motional state. Position is relative to the undisplaced
// trap center.
struct IonState {
  double x = 0.0;  // m
  double v = 0.0;  // m/s
  double t = 0.0;  // s
};

// Doppler cooling limit T_D = hbar*Gamma / (2 k_B).
double doppler_limit_temperature(const DetectionLaser& laser);

}  // namespace ionlab
