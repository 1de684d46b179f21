#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ionlab/constants.hpp"
#include "ionlab/dynamics.hpp"

using namespace ionlab;

namespace {

TrapConfig usual_trap(double drift = 0.0) {
  return TrapConfig(2 * kPi * 0.36e6, 2 * kPi * 1.83e6,
                    170.936 * kAtomicMassUnit, drift);
}

DetectionLaser usual_laser(double saturation = 15.0) {
  return DetectionLaser(369.5e-9, 2 * kPi * 19.6e6, -2 * kPi * 40e6,
                        saturation, +1);
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("scattering rate at rest and at resonance") {
  const DetectionLaser laser = usual_laser();
  // frozen against an independent evaluation of the Lorentzian
  CHECK(scattering_rate(0.0, laser) ==
        doctest::Approx(2.8280343356e7).epsilon(1e-9));
  // the resonant velocity cancels the detuning and attains the saturated cap
  const double v_res = laser.detuning() / (laser.direction() * laser.wavenumber());
  CHECK(scattering_rate(v_res, laser) ==
        doctest::Approx(laser.saturated_rate()).epsilon(1e-12));
  CHECK(laser.saturated_rate() == doctest::Approx(5.772676500971244e7).epsilon(1e-12));
  // rate falls off on both sides of resonance
  CHECK(scattering_rate(v_res + 5.0, laser) < scattering_rate(v_res, laser));
  CHECK(scattering_rate(v_res - 5.0, laser) < scattering_rate(v_res, laser));
  CHECK(scattering_rate(3.0, usual_laser(0.0)) == 0.0);
}

TEST_CASE("max step size: rate bound at high saturation, period bound dark") {
  const TrapConfig trap = usual_trap();
  CHECK(max_step_size(trap, usual_laser()) ==
        doctest::Approx(1.0 / (10.0 * 5.772676500971244e7)).epsilon(1e-12));
  CHECK(max_step_size(trap, usual_laser(0.0)) ==
        doctest::Approx(trap.period() / 100.0).epsilon(1e-15));
}

TEST_CASE("dark evolution hits the closed-form waypoints") {
  const TrapConfig trap = usual_trap();
  const double x_d = 4.7e-6;
  const double T = trap.period();
  const IonState start{0.0, 0.0, 0.0};

  const IonState half = evolve_dark(start, x_d, T / 2, trap);
  CHECK(half.x == doctest::Approx(2 * x_d).epsilon(1e-12));
  CHECK(std::abs(half.v) < x_d * trap.omega_a() * 1e-9);
  CHECK(half.t == doctest::Approx(T / 2).epsilon(1e-15));

  const IonState quarter = evolve_dark(start, x_d, T / 4, trap);
  CHECK(quarter.x == doctest::Approx(x_d).epsilon(1e-12));
  CHECK(quarter.v == doctest::Approx(x_d * trap.omega_a()).epsilon(1e-12));

  const IonState full = evolve_dark(start, x_d, T, trap);
  CHECK(std::abs(full.x) < x_d * 1e-12);
  CHECK(std::abs(full.v) < x_d * trap.omega_a() * 1e-12);

  const IonState frozen = evolve_dark(IonState{1e-6, 2.0, 0.5}, x_d, 0.0, trap);
  CHECK(frozen.x == 1e-6);
  CHECK(frozen.v == 2.0);
  CHECK(frozen.t == 0.5);

  CHECK_THROWS_AS(evolve_dark(start, x_d, -1e-9, trap), std::invalid_argument);
}

TEST_CASE("displace and return reproduces the bang-bang amplitude law") {
  const TrapConfig trap = usual_trap();
  const double T = trap.period();
  RngStream rng(5);
  for (int i = 0; i < 50; ++i) {
    const double x_d = (0.5 + 19.5 * rng.uniform01()) * 1e-6;
    const double tau = 3.0 * T * rng.uniform01();
    const IonState out = evolve_dark(IonState{}, x_d, tau, trap);
    const double amp = std::hypot(out.x, out.v / trap.omega_a());
    const double expected = 2 * x_d * std::abs(std::sin(kPi * tau / T));
    CHECK(amp == doctest::Approx(expected).epsilon(1e-11));
  }
}

TEST_CASE("lit step matches an explicitly coded classic rk4 step") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser dark = usual_laser(0.0);  // no scattering
  const double w2 = trap.omega_a() * trap.omega_a();
  const double c = 1.0e-6;
  const double h = 2.0e-8;  // inside the dark bound T/100
  double x = 3.0e-6, v = 2.0;

  const double k1x = v, k1v = -w2 * (x - c);
  const double k2x = v + 0.5 * h * k1v, k2v = -w2 * (x + 0.5 * h * k1x - c);
  const double k3x = v + 0.5 * h * k2v, k3v = -w2 * (x + 0.5 * h * k2x - c);
  const double k4x = v + h * k3v, k4v = -w2 * (x + h * k3x - c);
  const double x_ref = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
  const double v_ref = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);

  RngStream rng(1);
  const StepOutcome out =
      step_detect(IonState{x, v, 0.0}, c, h, trap, dark, 0.5, rng);
  CHECK(out.state.x == doctest::Approx(x_ref).epsilon(1e-14));
  CHECK(out.state.v == doctest::Approx(v_ref).epsilon(1e-14));
  CHECK(out.state.t == doctest::Approx(h).epsilon(1e-15));
  CHECK_FALSE(out.detected);
}

TEST_CASE("step size guards") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  RngStream rng(1);
  const double bound = max_step_size(trap, laser);
  CHECK_THROWS_AS(
      step_detect(IonState{}, 0.0, 1.01 * bound, trap, laser, 0.1, rng),
      std::invalid_argument);
  CHECK_THROWS_AS(step_detect(IonState{}, 0.0, 0.0, trap, laser, 0.1, rng),
                  std::invalid_argument);
  CHECK_NOTHROW(step_detect(IonState{}, 0.0, bound, trap, laser, 0.1, rng));
}

TEST_CASE("dark integration conserves energy over 400 periods") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser dark = usual_laser(0.0);
  const double w2 = trap.omega_a() * trap.omega_a();
  const double h = trap.period() / 400;
  RngStream rng(3);
  IonState s{8.5e-6, 0.0, 0.0};
  const double e0 = s.v * s.v + w2 * s.x * s.x;
  for (int i = 0; i < 400 * 400; ++i)
    s = step_detect(s, 0.0, h, trap, dark, 0.1, rng).state;
  const double e1 = s.v * s.v + w2 * s.x * s.x;
  CHECK(std::abs(e1 - e0) / e0 < 1e-6);
}

TEST_CASE("thermal sampling at the doppler limit") {
  const TrapConfig trap = usual_trap();
  RngStream rng(77);
  const double t_doppler = 4.7032582090171196e-4;
  const int n = 100000;
  double sx = 0, sx2 = 0, sv = 0, sv2 = 0;
  for (int i = 0; i < n; ++i) {
    const IonState s = sample_thermal(trap, t_doppler, rng);
    CHECK(s.t == 0.0);
    sx += s.x;
    sx2 += s.x * s.x;
    sv += s.v;
    sv2 += s.v * s.v;
  }
  // frozen sigma_v = sqrt(kB T / m) and sigma_x = sigma_v / omega
  const double sigma_v = 0.15125151561626954;
  const double sigma_x = 6.686785100130638e-8;
  CHECK(std::sqrt(sv2 / n) == doctest::Approx(sigma_v).epsilon(0.02));
  CHECK(std::sqrt(sx2 / n) == doctest::Approx(sigma_x).epsilon(0.02));
  CHECK(std::abs(sv / n) < 5 * sigma_v / std::sqrt(double(n)));
  CHECK(std::abs(sx / n) < 5 * sigma_x / std::sqrt(double(n)));
}

TEST_CASE("zero temperature is the exact origin and still draws") {
  const TrapConfig trap = usual_trap();
  RngStream a(9), b(9);
  const IonState s = sample_thermal(trap, 0.0, a);
  CHECK(s.x == 0.0);
  CHECK(s.v == 0.0);
  // the gaussian pair is consumed even at T = 0, keeping streams aligned
  (void)b.gaussian_pair();
  CHECK(a() == b());
  RngStream c(9);
  CHECK_THROWS_AS(sample_thermal(trap, -1e-6, c), std::invalid_argument);
}

TEST_CASE("timeline validation and temperature resolution") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 1e-5;
  CHECK_NOTHROW(tl.validate(trap, laser));
  CHECK(tl.resolved_init_temperature(laser) ==
        doctest::Approx(doppler_limit_temperature(laser)).epsilon(1e-15));
  tl.init_temperature = 1e-3;
  CHECK(tl.resolved_init_temperature(laser) == 1e-3);

  SequenceTimeline bad = tl;
  bad.dt = 2e-9;  // above 1/(10 R_max) = 1.73 ns
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
  bad = tl;
  bad.detect_duration = 0.0;
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
  bad = tl;
  bad.detection_efficiency = 0.0;
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
  bad = tl;
  bad.detection_efficiency = 1.1;
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
  bad = tl;
  bad.background_cps = -1.0;
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
  bad = tl;
  bad.init_temperature = -1.0;
  CHECK_THROWS_AS(bad.validate(trap, laser), std::invalid_argument);
}

TEST_CASE("dark sequence emits nothing; background arrives alone") {
  const TrapConfig trap = usual_trap();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 2e-8;
  tl.detect_duration = 1e-3;

  RngStream rng(4);
  const PhotonEvents none = run_sequence(tl, trap, usual_laser(0.0), rng);
  CHECK(none.timestamps.empty());

  tl.background_cps = 1e6;  // expect ~1000 events over 1 ms
  RngStream rng2(4);
  const PhotonEvents bg = run_sequence(tl, trap, usual_laser(0.0), rng2);
  CHECK(bg.timestamps.size() > 800);
  CHECK(bg.timestamps.size() < 1200);
  CHECK(std::is_sorted(bg.timestamps.begin(), bg.timestamps.end()));
  CHECK(bg.timestamps.front() >= 0.0);
  CHECK(bg.timestamps.back() <= tl.detect_duration);
}

TEST_CASE("scattered photons land in the window, in order, at a sane rate") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(0.0, 0.0);  // cold ion sitting at the center
  tl.dt = 1.6e-9;
  tl.detect_duration = 2e-4;
  tl.detection_efficiency = 1.0;
  tl.init_temperature = 0.0;

  RngStream rng(11);
  const PhotonEvents ev = run_sequence(tl, trap, laser, rng);
  CHECK(std::is_sorted(ev.timestamps.begin(), ev.timestamps.end()));
  CHECK(ev.timestamps.front() >= 0.0);
  CHECK(ev.timestamps.back() <= tl.detect_duration);
  // at rest the rate is the frozen 2.828e7/s; recoil heating perturbs it
  // only mildly over 0.2 ms
  const double expected = 2.8280343356e7 * tl.detect_duration;
  CHECK(double(ev.timestamps.size()) > 0.75 * expected);
  CHECK(double(ev.timestamps.size()) < 1.25 * expected);
}

TEST_CASE("detection efficiency thins events without touching the dynamics") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 5e-5;

  SequenceTimeline low = tl;
  low.detection_efficiency = 0.05;
  SequenceTimeline all = tl;
  all.detection_efficiency = 1.0;

  RngStream r1(21), r2(21);
  const PhotonEvents few = run_sequence(low, trap, laser, r1);
  const PhotonEvents full = run_sequence(all, trap, laser, r2);
  CHECK(few.timestamps.size() < full.timestamps.size());
  // same seed => same scatter times; the low-efficiency run is a subset
  CHECK(std::includes(full.timestamps.begin(), full.timestamps.end(),
                      few.timestamps.begin(), few.timestamps.end()));
}

TEST_CASE("accumulation rejects bad binning and sequence counts") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 2e-5;
  CHECK_THROWS_AS(run_accumulation(tl, trap, laser, 0, 1e-7, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_accumulation(tl, trap, laser, 10, 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_accumulation(tl, trap, laser, 10, 2e-5, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_accumulation(tl, trap, laser, 10, 3e-5, 1),
                  std::invalid_argument);
}

TEST_CASE("single-sequence accumulation equals manual binning") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 2e-5;
  const double bw = 1e-7;
  const std::uint64_t seed = 2026;

  const McsHistogram hist = run_accumulation(tl, trap, laser, 1, bw, seed);
  RngStream rng = RngStream::for_sequence(seed, 0);
  const PhotonEvents ev = run_sequence(tl, trap, laser, rng);

  Eigen::ArrayX<std::int64_t> manual =
      Eigen::ArrayX<std::int64_t>::Zero(hist.n_bins());
  for (const double ts : ev.timestamps) {
    auto b = static_cast<Eigen::Index>(ts / bw);
    manual[std::min(b, hist.n_bins() - 1)] += 1;
  }
  CHECK(hist.n_sequences == 1);
  CHECK((hist.counts == manual).all());
  CHECK(hist.counts.sum() == std::int64_t(ev.timestamps.size()));
}

TEST_CASE("accumulation is bit-identical across thread counts") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 2e-5;
  tl.background_cps = 2e4;

  const McsHistogram h1 =
      run_accumulation(tl, trap, laser, 64, 1e-7, 99, {.n_threads = 1});
  const McsHistogram h4 =
      run_accumulation(tl, trap, laser, 64, 1e-7, 99, {.n_threads = 4});
  const McsHistogram h8 =
      run_accumulation(tl, trap, laser, 64, 1e-7, 99, {.n_threads = 8});
  CHECK((h1.counts == h4.counts).all());
  CHECK((h1.counts == h8.counts).all());
  CHECK(h1.n_sequences == 64);
  CHECK(h1.background_rate == doctest::Approx(2e4 * 1e-7 * 64).epsilon(1e-12));
  CHECK(h1.counts.sum() > 0);

  const McsHistogram other =
      run_accumulation(tl, trap, laser, 64, 1e-7, 100, {.n_threads = 1});
  CHECK((h1.counts != other.counts).any());
}

TEST_CASE("drift shifts later sequences only") {
  const TrapConfig still = usual_trap(0.0);
  const TrapConfig drifting = usual_trap(0.01);
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 2e-5;

  // sequence 0 runs at omega_a * (1 + drift * 0/n): a single-sequence run
  // cannot see the drift at all
  const McsHistogram a = run_accumulation(tl, still, laser, 1, 1e-7, 7);
  const McsHistogram b = run_accumulation(tl, drifting, laser, 1, 1e-7, 7);
  CHECK((a.counts == b.counts).all());

  const McsHistogram c = run_accumulation(tl, still, laser, 8, 1e-7, 7);
  const McsHistogram d = run_accumulation(tl, drifting, laser, 8, 1e-7, 7);
  CHECK((c.counts != d.counts).any());
}

TEST_CASE("the displaced ion cools back into an unmodulated trace") {
  const TrapConfig trap = usual_trap();
  const DetectionLaser laser = usual_laser();
  SequenceTimeline tl;
  tl.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
  tl.dt = 1.6e-9;
  tl.detect_duration = 1.6e-3;

  const McsHistogram hist = run_accumulation(tl, trap, laser, 300, 1e-7, 314,
                                             {.n_threads = 0});
  const auto fano = [&](Eigen::Index lo, Eigen::Index hi) {
    const auto w = hist.counts.segment(lo, hi - lo).cast<double>();
    const double mean = w.mean();
    return (w - mean).square().sum() / (double(w.size()) - 1.0) / mean;
  };
  // early bins swing with the coherent oscillation: variance far above
  // Poisson; by 1.4 ms the motion has cooled and the excess is gone
  const double early = fano(0, 400);
  const double late = fano(hist.n_bins() - 2000, hist.n_bins());
  CHECK(early > 8.0);
  CHECK(late < 2.0);
}

}  // TEST_SUITE
