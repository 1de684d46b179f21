#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ionlab/core.hpp"
#include "ionlab/histogram.hpp"
#include "ionlab/rng.hpp"

// Monte Carlo engine for the 1-D ion motion: exact harmonic evolution while
// the light is off, RK4 integration with a stochastic photon-scattering
// force while the detection laser is on.

namespace ionlab {

// Timing and detection parameters of one experimental sequence:
// cool -> displace for tau -> return -> detect.
struct SequenceTimeline {
  DisplacementPulse pulse;
  double detect_duration = 4e-3;   // s
  double dt = 1e-9;                // integrator step, s
  double detection_efficiency = 0.1;
  // Initialization temperature; NaN selects the Doppler limit of the laser.
  double init_temperature = std::numeric_limits<double>::quiet_NaN();
  double background_cps = 0.0;     // stray-light count rate at the detector

  double resolved_init_temperature(const DetectionLaser& laser) const;

  // Throws std::invalid_argument if the step bound or ranges are violated.
  void validate(const TrapConfig& trap, const DetectionLaser& laser) const;
};

// Largest admissible integrator step: min(T/100, 1/(10 R_max)). Keeps the
// per-step scatter probability at or below 0.1.
double max_step_size(const TrapConfig& trap, const DetectionLaser& laser);

// Detected-photon timestamps of one sequence, seconds from detection start.
struct PhotonEvents {
  std::vector<double> timestamps;  // non-decreasing, within [0, detect_duration]
};

// Photon scattering rate for an ion moving at velocity v:
//   (s Gamma/2) / (1 + s + 4 (delta - direction k_L v)^2 / Gamma^2).
double scattering_rate(double velocity, const DetectionLaser& laser);

// Exact harmonic evolution about `center` with no light: phase-space rotation
// by omega_a * duration. No numerical integration.
IonState evolve_dark(const IonState& state, double center, double duration,
                     const TrapConfig& trap);

struct StepOutcome {
  IonState state;
  bool detected = false;
};

// One RK4 step under the harmonic force -m omega^2 (x - center), followed by
// an at-most-one scattering decision with probability rate*dt. A scatter
// kicks the velocity by the absorption recoil direction*hbar k/m plus an
// emission recoil u*hbar k/m, u uniform on [-1, 1], and is detected with
// independent probability detection_efficiency.
// Throws std::invalid_argument if dt exceeds max_step_size.
StepOutcome step_detect(const IonState& state, double center, double dt,
                        const TrapConfig& trap, const DetectionLaser& laser,
                        double detection_efficiency, RngStream& rng);

// Thermal state: x ~ N(0, sigma_v/omega_a), v ~ N(0, sigma_v),
// sigma_v = sqrt(k_B T / m); t = 0.
IonState sample_thermal(const TrapConfig& trap, double temperature,
                        RngStream& rng);

// Full sequence: thermal init, dark evolution about x_d for tau, center
// return, then detection stepping for detect_duration.
PhotonEvents run_sequence(const SequenceTimeline& timeline,
                          const TrapConfig& trap, const DetectionLaser& laser,
                          RngStream& rng);

struct AccumulationOptions {
  int n_threads = 1;  // <= 0 selects std::thread::hardware_concurrency()
};

// n_sequences independent sequences, each on its own stream derived from
// (master_seed, sequence index), binned into a histogram. With a nonzero
// trap drift_fraction, sequence j runs at omega_a*(1 + drift*j/n). Counts
// are bit-identical for a given master_seed regardless of thread count.
McsHistogram run_accumulation(const SequenceTimeline& timeline,
                              const TrapConfig& trap,
                              const DetectionLaser& laser,
                              std::int64_t n_sequences, double bin_width,
                              std::uint64_t master_seed,
                              const AccumulationOptions& options = {});

}  // namespace ionlab
