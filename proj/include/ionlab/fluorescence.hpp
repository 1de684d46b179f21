#pragma once

#include <Eigen/Dense>

#include "ionlab/core.hpp"

// Analytic fluorescence-dynamics model: the scattering rate of an ion
// oscillating at omega_a, with the Doppler shift of its sinusoidal velocity
// inserted into the Lorentzian line shape.

namespace ionlab {

class OscillationModel {
 public:
  // peak_velocity >= 0 (m/s); phase in [0, 2pi); scale > 0 converts a rate
  // into expected detected counts per bin (absorbs efficiency, number of
  // sequences, and bin width); background is counts per bin.
  OscillationModel(double peak_velocity, double phase, double omega_a,
                   const DetectionLaser& laser, double scale,
                   double background);

  double peak_velocity() const { return peak_velocity_; }
  double phase() const { return phase_; }
  double omega_a() const { return omega_a_; }
  const DetectionLaser& laser() const { return laser_; }
  double scale() const { return scale_; }
  double background() const { return background_; }

 private:
  double peak_velocity_;
  double phase_;
  double omega_a_;
  DetectionLaser laser_;
  double scale_;
  double background_;
};

// Instantaneous rate
//   s Gamma/2 / (1 + s + 4 {delta - 2 pi v sin(omega_a t + phi)/lambda}^2 / Gamma^2).
double model_rate(double t, const OscillationModel& m);

// x_a = v / omega_a.
double oscillation_amplitude(const OscillationModel& m);

// Expected counts per bin: scale * (bin-averaged rate, midpoint rule with
// >= 8 sub-samples) + background. Bins start at window_start and are
// bin_width wide. Throws std::invalid_argument on an empty grid.
Eigen::ArrayXd expected_bin_counts(const OscillationModel& m,
                                   double window_start, double bin_width,
                                   Eigen::Index n_bins, int subsamples = 8);

namespace detail {

// Rate kernel shared by model_rate and the trace fitter. Accepts raw
// (v, phase): a negative v is equivalent to phase + pi and occurs during
// fit iterations before normalization.
double oscillating_rate(double t, double v, double phase, double omega_a,
                        const DetectionLaser& laser);

// Midpoint-rule bin averages of oscillating_rate.
Eigen::ArrayXd binned_oscillating_rate(double v, double phase, double omega_a,
                                       const DetectionLaser& laser,
                                       double window_start, double bin_width,
                                       Eigen::Index n_bins, int subsamples);

}  // namespace detail

}  // namespace ionlab
