#include "ionlab/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

#include "ionlab/constants.hpp"

namespace ionlab {

void GyroParams::validate() const {
  if (n_kicks < 1)
    throw std::invalid_argument("GyroParams: n_kicks must be >= 1");
  if (!(std::isfinite(kick_wavenumber) && kick_wavenumber > 0.0))
    throw std::invalid_argument("GyroParams: kick_wavenumber must be > 0");
  if (!(std::isfinite(displacement) && displacement > 0.0))
    throw std::invalid_argument("GyroParams: displacement must be > 0");
  if (!(std::isfinite(interference_time) && interference_time > 0.0))
    throw std::invalid_argument("GyroParams: interference_time must be > 0");
  if (n_repetitions < 1)
    throw std::invalid_argument("GyroParams: n_repetitions must be >= 1");
}

double gyro_sensitivity(const GyroParams& p) {
  p.validate();
  return 1.0 / (2.0 * static_cast<double>(p.n_kicks) * p.kick_wavenumber *
                p.displacement * std::sqrt(p.interference_time));
}

double averaged_sensitivity(double sensitivity, std::int64_t n_repetitions) {
  if (n_repetitions < 1)
    throw std::invalid_argument(
        "averaged_sensitivity: n_repetitions must be >= 1");
  return sensitivity / std::sqrt(static_cast<double>(n_repetitions));
}

double rad_per_sqrt_s_to_deg_per_sqrt_hour(double s) {
  return s * (180.0 / kPi) * 60.0;  // sqrt(3600 s/hour) = 60
}

double deg_per_sqrt_hour_to_rad_per_sqrt_s(double s) {
  return s * (kPi / 180.0) / 60.0;
}

}  // namespace ionlab
