#include "ionlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "ionlab/parallel.hpp"

namespace ionlab {

double scattering_rate(double velocity, const DetectionLaser& laser) {
  const double gamma = laser.linewidth();
  const double det =
      laser.detuning() - laser.direction() * laser.wavenumber() * velocity;
  const double denom =
      1.0 + laser.saturation() + 4.0 * det * det / (gamma * gamma);
  return 0.5 * laser.saturation() * gamma / denom;
}

double max_step_size(const TrapConfig& trap, const DetectionLaser& laser) {
  const double by_period = trap.period() / 100.0;
  const double r_max = laser.saturated_rate();
  if (r_max <= 0.0) return by_period;
  return std::min(by_period, 0.1 / r_max);
}

IonState evolve_dark(const IonState& state, double center, double duration,
                     const TrapConfig& trap) {
  if (!(duration >= 0.0))
    throw std::invalid_argument("evolve_dark: duration must be >= 0");
  if (duration == 0.0) return state;
  const double w = trap.omega_a();
  const double theta = w * duration;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double rx = state.x - center;
  IonState out;
  out.x = center + rx * c + (state.v / w) * s;
  out.v = -w * rx * s + state.v * c;
  out.t = state.t + duration;
  return out;
}

namespace {

// RK4 for the linear force -m w^2 (x - c) collapses to one 2x2 update:
// with theta = w h, [x-c, v] multiplies [[a, b], [-w^2 b, a]] where
// a = 1 - theta^2/2 + theta^4/24 and b = h (1 - theta^2/6). This is the
// classic four-stage step evaluated in closed form, bit-identical to it.
struct Rk4Coeffs {
  double a;
  double b;
  double w2b;

  Rk4Coeffs(double omega, double h) {
    const double t2 = omega * h * omega * h;
    a = 1.0 - 0.5 * t2 + t2 * t2 / 24.0;
    b = h * (1.0 - t2 / 6.0);
    w2b = omega * omega * b;
  }
};

inline void advance(double& x, double& v, double center, const Rk4Coeffs& k) {
  const double rx = x - center;
  x = center + (k.a * rx + k.b * v);
  v = -k.w2b * rx + k.a * v;
}

// Scatter decision constants. The per-step test
//   u * denom(v) < (s Gamma/2) dt
// is scattering_rate(v)*dt > u without the division.
struct ScatterConsts {
  double delta;
  double dir_k;        // direction * k_L
  double one_plus_s;
  double four_inv_g2;  // 4 / Gamma^2
  double num_dt;       // (s Gamma / 2) * dt
  double kick;         // hbar k_L / m
  double dir_kick;

  ScatterConsts(const DetectionLaser& laser, const TrapConfig& trap,
                double dt) {
    const double gamma = laser.linewidth();
    delta = laser.detuning();
    dir_k = laser.direction() * laser.wavenumber();
    one_plus_s = 1.0 + laser.saturation();
    four_inv_g2 = 4.0 / (gamma * gamma);
    num_dt = 0.5 * laser.saturation() * gamma * dt;
    kick = kHbar * laser.wavenumber() / trap.mass();
    dir_kick = laser.direction() * kick;
  }
};

// Absorption kick along the beam plus isotropic-emission recoil projected
// on the axis (uniform on [-1, 1]). The detection draw is consumed on every
// scatter so the trajectory does not depend on the efficiency value.
inline bool scatter_detects(double& v, const ScatterConsts& sc,
                            double efficiency, RngStream& rng) {
  const double det = sc.delta - sc.dir_k * v;
  const double denom = sc.one_plus_s + sc.four_inv_g2 * det * det;
  if (rng.uniform01() * denom < sc.num_dt) {
    v += sc.dir_kick + rng.uniform_pm1() * sc.kick;
    return rng.uniform01() < efficiency;
  }
  return false;
}

}  // namespace

StepOutcome step_detect(const IonState& state, double center, double dt,
                        const TrapConfig& trap, const DetectionLaser& laser,
                        double detection_efficiency, RngStream& rng) {
  if (!(dt > 0.0) || dt > max_step_size(trap, laser))
    throw std::invalid_argument("step_detect: dt violates the step-size bound");
  const Rk4Coeffs k(trap.omega_a(), dt);
  const ScatterConsts sc(laser, trap, dt);
  StepOutcome out;
  out.state = state;
  advance(out.state.x, out.state.v, center, k);
  out.state.t = state.t + dt;
  out.detected = scatter_detects(out.state.v, sc, detection_efficiency, rng);
  return out;
}

IonState sample_thermal(const TrapConfig& trap, double temperature,
                        RngStream& rng) {
  if (!(temperature >= 0.0))
    throw std::invalid_argument("sample_thermal: temperature must be >= 0");
  const double sigma_v = std::sqrt(kBoltzmann * temperature / trap.mass());
  const double sigma_x = sigma_v / trap.omega_a();
  const auto [g1, g2] = rng.gaussian_pair();
  return {sigma_x * g1, sigma_v * g2, 0.0};
}

double SequenceTimeline::resolved_init_temperature(
    const DetectionLaser& laser) const {
  if (std::isnan(init_temperature)) return doppler_limit_temperature(laser);
  return init_temperature;
}

void SequenceTimeline::validate(const TrapConfig& trap,
                                const DetectionLaser& laser) const {
  if (!(std::isfinite(detect_duration) && detect_duration > 0.0))
    throw std::invalid_argument(
        "SequenceTimeline: detect_duration must be > 0");
  if (!(std::isfinite(dt) && dt > 0.0))
    throw std::invalid_argument("SequenceTimeline: dt must be > 0");
  if (dt > max_step_size(trap, laser))
    throw std::invalid_argument(
        "SequenceTimeline: dt exceeds min(period/100, 1/(10 R_max))");
  if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0))
    throw std::invalid_argument(
        "SequenceTimeline: detection_efficiency must be in (0, 1]");
  if (!std::isnan(init_temperature) &&
      !(std::isfinite(init_temperature) && init_temperature >= 0.0))
    throw std::invalid_argument(
        "SequenceTimeline: init_temperature must be >= 0 (or NaN for the "
        "Doppler limit)");
  if (!(std::isfinite(background_cps) && background_cps >= 0.0))
    throw std::invalid_argument(
        "SequenceTimeline: background_cps must be >= 0");
}

PhotonEvents run_sequence(const SequenceTimeline& timeline,
                          const TrapConfig& trap, const DetectionLaser& laser,
                          RngStream& rng) {
  timeline.validate(trap, laser);

  IonState state =
      sample_thermal(trap, timeline.resolved_init_temperature(laser), rng);
  state = evolve_dark(state, timeline.pulse.x_d(), timeline.pulse.tau(), trap);

  const double dt = timeline.dt;
  const std::int64_t n_steps = std::llround(timeline.detect_duration / dt);
  const Rk4Coeffs k(trap.omega_a(), dt);
  const ScatterConsts sc(laser, trap, dt);
  const double eff = timeline.detection_efficiency;

  PhotonEvents events;
  double x = state.x;
  double v = state.v;
  for (std::int64_t i = 0; i < n_steps; ++i) {
    advance(x, v, 0.0, k);
    if (scatter_detects(v, sc, eff, rng))
      events.timestamps.push_back((static_cast<double>(i) + 0.5) * dt);
  }

  if (timeline.background_cps > 0.0) {
    // Poisson stray-light arrivals, drawn as exponential gaps.
    const auto n_signal =
        static_cast<std::ptrdiff_t>(events.timestamps.size());
    double t = 0.0;
    for (;;) {
      t -= std::log(rng.uniform_open01()) / timeline.background_cps;
      if (t >= timeline.detect_duration) break;
      events.timestamps.push_back(t);
    }
    std::inplace_merge(events.timestamps.begin(),
                       events.timestamps.begin() + n_signal,
                       events.timestamps.end());
  }
  return events;
}

McsHistogram run_accumulation(const SequenceTimeline& timeline,
                              const TrapConfig& trap,
                              const DetectionLaser& laser,
                              std::int64_t n_sequences, double bin_width,
                              std::uint64_t master_seed,
                              const AccumulationOptions& options) {
  timeline.validate(trap, laser);
  if (n_sequences < 1)
    throw std::invalid_argument("run_accumulation: n_sequences must be >= 1");
  if (!(std::isfinite(bin_width) && bin_width > 0.0))
    throw std::invalid_argument("run_accumulation: bin_width must be > 0");
  if (bin_width >= timeline.detect_duration)
    throw std::invalid_argument(
        "run_accumulation: bin_width must be smaller than detect_duration");

  const double q = timeline.detect_duration / bin_width;
  auto n_bins = static_cast<std::int64_t>(std::floor(q));
  if (q - static_cast<double>(n_bins) > 1e-6) ++n_bins;  // partial final bin

  const int n_workers = resolve_thread_count(options.n_threads, n_sequences);
  std::vector<Eigen::ArrayX<std::int64_t>> partial(
      n_workers, Eigen::ArrayX<std::int64_t>::Zero(n_bins));

  const double inv_bin = 1.0 / bin_width;
  const double drift = trap.drift_fraction();
  parallel_blocks(
      n_sequences, n_workers,
      [&](int worker, std::int64_t first, std::int64_t last) {
        auto& counts = partial[worker];
        for (std::int64_t j = first; j < last; ++j) {
          TrapConfig seq_trap = trap;
          if (drift != 0.0) {
            const double factor = 1.0 + drift * static_cast<double>(j) /
                                            static_cast<double>(n_sequences);
            seq_trap = trap.with_omega_a(trap.omega_a() * factor);
          }
          RngStream rng = RngStream::for_sequence(
              master_seed, static_cast<std::uint64_t>(j));
          const PhotonEvents events =
              run_sequence(timeline, seq_trap, laser, rng);
          for (double ts : events.timestamps) {
            auto b = static_cast<std::int64_t>(ts * inv_bin);
            if (b >= n_bins) b = n_bins - 1;
            ++counts[b];
          }
        }
      });

  McsHistogram hist;
  hist.bin_width = bin_width;
  hist.n_sequences = n_sequences;
  hist.background_rate =
      timeline.background_cps * bin_width * static_cast<double>(n_sequences);
  hist.counts = std::move(partial[0]);
  for (int w = 1; w < n_workers; ++w) hist.counts += partial[w];
  return hist;
}

}  // namespace ionlab
