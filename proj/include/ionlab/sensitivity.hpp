#pragma once

#include <cstdint>

// Sagnac gyroscope sensitivity for the displaced-ion interferometer:
// spin-dependent kicks open a two-dimensional orbit whose enclosed area is
// set by the trap displacement.

namespace ionlab {

struct GyroParams {
  std::int64_t n_kicks = 0;          // number of spin-dependent kicks
  double kick_wavenumber = 0.0;      // 1/m
  double displacement = 0.0;         // x_d, m
  double interference_time = 0.0;    // s
  std::int64_t n_repetitions = 1;

  // Throws std::invalid_argument unless all fields are strictly positive.
  void validate() const;
};

// S = 1 / (2 N_k k x_d sqrt(dt)), in rad/sqrt(s). A variant with an extra
// hbar factor circulates in the literature; with the inputs used here it
// does not produce a quantity in rad/sqrt(s), so it is not used.
double gyro_sensitivity(const GyroParams& p);

// Sensitivity after n independent repetitions: S / sqrt(n).
double averaged_sensitivity(double sensitivity, std::int64_t n_repetitions);

// Unit rendering used for reporting.
double rad_per_sqrt_s_to_deg_per_sqrt_hour(double s);
double deg_per_sqrt_hour_to_rad_per_sqrt_s(double s);

}  // namespace ionlab
