#include "ionlab/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "ionlab/constants.hpp"

namespace ionlab {

namespace {

constexpr double kMhz = kTwoPi * 1e6;  // ordinary MHz -> rad/s

double get_number(const nlohmann::json& section, const char* section_name,
                  const char* key, double fallback) {
  if (!section.contains(key)) return fallback;
  const auto& v = section.at(key);
  if (!v.is_number())
    throw std::invalid_argument(std::string("config: ") + section_name + "." +
                                key + " must be a number");
  return v.get<double>();
}

std::int64_t get_count(const nlohmann::json& section, const char* section_name,
                       const char* key, std::int64_t fallback) {
  if (!section.contains(key)) return fallback;
  const auto& v = section.at(key);
  if (!v.is_number_integer())
    throw std::invalid_argument(std::string("config: ") + section_name + "." +
                                key + " must be an integer");
  return v.get<std::int64_t>();
}

const nlohmann::json& get_section(const nlohmann::json& j, const char* name,
                                  const nlohmann::json& empty) {
  if (!j.contains(name)) return empty;
  const auto& s = j.at(name);
  if (!s.is_object())
    throw std::invalid_argument(std::string("config: ") + name +
                                " must be an object");
  return s;
}

}  // namespace

SimulationConfig::SimulationConfig()
    : trap(kMhz * 0.36, kMhz * 1.83, kDefaultIonMassU * kAtomicMassUnit, 0.0),
      laser(kDefaultWavelength, kMhz * kDefaultLinewidthMHz, -kMhz * 40.0,
            15.0, 1) {
  timeline.pulse = DisplacementPulse(4.7e-6, 0.9e-6);
}

SimulationConfig SimulationConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be a JSON object");
  SimulationConfig cfg;  // partial documents fall back to these defaults
  const nlohmann::json empty = nlohmann::json::object();

  {
    const auto& s = get_section(j, "trap", empty);
    const double omega_a =
        kMhz * get_number(s, "trap", "omega_a_mhz", cfg.trap.omega_a() / kMhz);
    const double omega_r =
        kMhz * get_number(s, "trap", "omega_r_mhz", cfg.trap.omega_r() / kMhz);
    const double mass =
        kAtomicMassUnit *
        get_number(s, "trap", "mass_u", cfg.trap.mass() / kAtomicMassUnit);
    const double drift =
        get_number(s, "trap", "drift_fraction", cfg.trap.drift_fraction());
    try {
      cfg.trap = TrapConfig(omega_a, omega_r, mass, drift);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("config: trap: ") + e.what());
    }
  }

  {
    const auto& s = get_section(j, "laser", empty);
    const double wavelength =
        1e-9 *
        get_number(s, "laser", "wavelength_nm", cfg.laser.wavelength() * 1e9);
    const double linewidth =
        kMhz *
        get_number(s, "laser", "linewidth_mhz", cfg.laser.linewidth() / kMhz);
    const double detuning =
        kMhz *
        get_number(s, "laser", "detuning_mhz", cfg.laser.detuning() / kMhz);
    const double saturation =
        get_number(s, "laser", "saturation", cfg.laser.saturation());
    const auto direction = static_cast<int>(
        get_count(s, "laser", "direction", cfg.laser.direction()));
    try {
      cfg.laser =
          DetectionLaser(wavelength, linewidth, detuning, saturation, direction);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("config: laser: ") + e.what());
    }
  }

  {
    const auto& s = get_section(j, "pulse", empty);
    const double x_d =
        1e-6 * get_number(s, "pulse", "x_d_um", cfg.timeline.pulse.x_d() * 1e6);
    const double tau =
        1e-6 * get_number(s, "pulse", "tau_us", cfg.timeline.pulse.tau() * 1e6);
    try {
      cfg.timeline.pulse = DisplacementPulse(x_d, tau);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("config: pulse: ") + e.what());
    }
  }

  {
    const auto& s = get_section(j, "timeline", empty);
    cfg.timeline.detect_duration =
        1e-3 * get_number(s, "timeline", "detect_duration_ms",
                          cfg.timeline.detect_duration * 1e3);
    cfg.timeline.dt =
        1e-9 * get_number(s, "timeline", "dt_ns", cfg.timeline.dt * 1e9);
    cfg.timeline.detection_efficiency =
        get_number(s, "timeline", "detection_efficiency",
                   cfg.timeline.detection_efficiency);
    if (s.contains("init_temperature_k")) {
      const auto& v = s.at("init_temperature_k");
      if (v.is_null())
        cfg.timeline.init_temperature =
            std::numeric_limits<double>::quiet_NaN();
      else if (v.is_number())
        cfg.timeline.init_temperature = v.get<double>();
      else
        throw std::invalid_argument(
            "config: timeline.init_temperature_k must be a number or null");
    }
    cfg.timeline.background_cps = get_number(
        s, "timeline", "background_cps", cfg.timeline.background_cps);
  }

  {
    const auto& s = get_section(j, "accumulation", empty);
    cfg.accumulation.n_sequences = get_count(s, "accumulation", "n_sequences",
                                             cfg.accumulation.n_sequences);
    cfg.accumulation.bin_width =
        1e-9 * get_number(s, "accumulation", "bin_width_ns",
                          cfg.accumulation.bin_width * 1e9);
  }

  {
    const auto& s = get_section(j, "fit", empty);
    cfg.fit.window_periods =
        get_number(s, "fit", "window_periods", cfg.fit.window_periods);
  }

  {
    const auto& s = get_section(j, "sweep", empty);
    cfg.sweep.tau_over_t_min =
        get_number(s, "sweep", "tau_over_t_min", cfg.sweep.tau_over_t_min);
    cfg.sweep.tau_over_t_max =
        get_number(s, "sweep", "tau_over_t_max", cfg.sweep.tau_over_t_max);
    cfg.sweep.tau_over_t_step =
        get_number(s, "sweep", "tau_over_t_step", cfg.sweep.tau_over_t_step);
    cfg.sweep.n_sequences =
        get_count(s, "sweep", "n_sequences", cfg.sweep.n_sequences);
  }

  return cfg;
}

nlohmann::ordered_json SimulationConfig::to_json() const {
  nlohmann::ordered_json j;
  j["trap"] = nlohmann::ordered_json{
      {"omega_a_mhz", trap.omega_a() / kMhz},
      {"omega_r_mhz", trap.omega_r() / kMhz},
      {"mass_u", trap.mass() / kAtomicMassUnit},
      {"drift_fraction", trap.drift_fraction()},
  };
  j["laser"] = nlohmann::ordered_json{
      {"wavelength_nm", laser.wavelength() * 1e9},
      {"linewidth_mhz", laser.linewidth() / kMhz},
      {"detuning_mhz", laser.detuning() / kMhz},
      {"saturation", laser.saturation()},
      {"direction", laser.direction()},
  };
  j["pulse"] = nlohmann::ordered_json{
      {"x_d_um", timeline.pulse.x_d() * 1e6},
      {"tau_us", timeline.pulse.tau() * 1e6},
  };
  nlohmann::ordered_json tl{
      {"detect_duration_ms", timeline.detect_duration * 1e3},
      {"dt_ns", timeline.dt * 1e9},
      {"detection_efficiency", timeline.detection_efficiency},
      {"background_cps", timeline.background_cps},
  };
  if (std::isnan(timeline.init_temperature))
    tl["init_temperature_k"] = nullptr;
  else
    tl["init_temperature_k"] = timeline.init_temperature;
  j["timeline"] = std::move(tl);
  j["accumulation"] = nlohmann::ordered_json{
      {"n_sequences", accumulation.n_sequences},
      {"bin_width_ns", accumulation.bin_width * 1e9},
  };
  j["fit"] = nlohmann::ordered_json{
      {"window_periods", fit.window_periods},
  };
  j["sweep"] = nlohmann::ordered_json{
      {"tau_over_t_min", sweep.tau_over_t_min},
      {"tau_over_t_max", sweep.tau_over_t_max},
      {"tau_over_t_step", sweep.tau_over_t_step},
      {"n_sequences", sweep.n_sequences},
  };
  return j;
}

SimulationConfig SimulationConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // e.what() carries line/column diagnostics
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

}  // namespace ionlab
