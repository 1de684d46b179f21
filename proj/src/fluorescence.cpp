#include "ionlab/fluorescence.hpp"

#include <cmath>
#include <stdexcept>

namespace ionlab {

OscillationModel::OscillationModel(double peak_velocity, double phase,
                                   double omega_a, const DetectionLaser& laser,
                                   double scale, double background)
    : peak_velocity_(peak_velocity),
      phase_(phase),
      omega_a_(omega_a),
      laser_(laser),
      scale_(scale),
      background_(background) {
  if (!(std::isfinite(peak_velocity) && peak_velocity >= 0.0))
    throw std::invalid_argument("OscillationModel: peak_velocity must be >= 0");
  if (!(std::isfinite(phase) && phase >= 0.0 && phase < kTwoPi))
    throw std::invalid_argument("OscillationModel: phase must lie in [0, 2pi)");
  if (!(std::isfinite(omega_a) && omega_a > 0.0))
    throw std::invalid_argument("OscillationModel: omega_a must be > 0");
  if (!(std::isfinite(scale) && scale > 0.0))
    throw std::invalid_argument("OscillationModel: scale must be > 0");
  if (!(std::isfinite(background) && background >= 0.0))
    throw std::invalid_argument("OscillationModel: background must be >= 0");
}

namespace detail {

double oscillating_rate(double t, double v, double phase, double omega_a,
                        const DetectionLaser& laser) {
  const double gamma = laser.linewidth();
  // 2 pi v sin(...) / lambda = k_L v sin(...)
  const double doppler =
      laser.wavenumber() * v * std::sin(omega_a * t + phase);
  const double det = laser.detuning() - doppler;
  const double denom =
      1.0 + laser.saturation() + 4.0 * det * det / (gamma * gamma);
  return 0.5 * laser.saturation() * gamma / denom;
}

Eigen::ArrayXd binned_oscillating_rate(double v, double phase, double omega_a,
                                       const DetectionLaser& laser,
                                       double window_start, double bin_width,
                                       Eigen::Index n_bins, int subsamples) {
  if (n_bins < 1)
    throw std::invalid_argument("binned_oscillating_rate: empty bin grid");
  if (!(std::isfinite(bin_width) && bin_width > 0.0))
    throw std::invalid_argument("binned_oscillating_rate: bin_width must be > 0");
  if (subsamples < 1)
    throw std::invalid_argument("binned_oscillating_rate: subsamples must be >= 1");

  const double sub = bin_width / subsamples;
  Eigen::ArrayXd out(n_bins);
  for (Eigen::Index i = 0; i < n_bins; ++i) {
    const double t0 = window_start + static_cast<double>(i) * bin_width;
    double acc = 0.0;
    for (int j = 0; j < subsamples; ++j)
      acc += oscillating_rate(t0 + (j + 0.5) * sub, v, phase, omega_a, laser);
    out[i] = acc / subsamples;
  }
  return out;
}

}  // namespace detail

double model_rate(double t, const OscillationModel& m) {
  return detail::oscillating_rate(t, m.peak_velocity(), m.phase(), m.omega_a(),
                                  m.laser());
}

double oscillation_amplitude(const OscillationModel& m) {
  return m.peak_velocity() / m.omega_a();
}

Eigen::ArrayXd expected_bin_counts(const OscillationModel& m,
                                   double window_start, double bin_width,
                                   Eigen::Index n_bins, int subsamples) {
  const Eigen::ArrayXd rate = detail::binned_oscillating_rate(
      m.peak_velocity(), m.phase(), m.omega_a(), m.laser(), window_start,
      bin_width, n_bins, subsamples);
  return m.scale() * rate + m.background();
}

}  // namespace ionlab
