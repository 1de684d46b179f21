#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ionlab/core.hpp"
#include "ionlab/dynamics.hpp"

// JSON run configuration. External units are experiment-friendly (MHz, nm,
// um, us, ns, atomic mass units); everything is converted to SI angular
// conventions here at the boundary.

namespace ionlab {

struct AccumulationConfig {
  std::int64_t n_sequences = 16715;
  double bin_width = 100e-9;  // s
};

struct FitConfig {
  double window_periods = 5.0;  // trace-fit window, in trap periods
};

struct SweepConfig {
  double tau_over_t_min = 0.0;
  double tau_over_t_max = 3.0;
  double tau_over_t_step = 0.1;
  std::int64_t n_sequences = 500;  // per sweep point
};

struct SimulationConfig {
  TrapConfig trap;
  DetectionLaser laser;
  SequenceTimeline timeline;  // carries the displacement pulse
  AccumulationConfig accumulation;
  FitConfig fit;
  SweepConfig sweep;

  SimulationConfig();  // documented defaults

  // Resolved snapshot in external units; round-trips through from_json.
  nlohmann::ordered_json to_json() const;

  // Accepts a partial document; missing fields keep their defaults.
  // Throws std::invalid_argument naming the offending field.
  static SimulationConfig from_json(const nlohmann::json& j);

  // Parse errors carry the file name and position diagnostics.
  static SimulationConfig load(const std::string& path);
};

}  // namespace ionlab
