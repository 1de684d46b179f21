#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ionlab/fitting.hpp"
#include "ionlab/histogram.hpp"

// CSV formats and run manifests. All numeric formatting is locale-free and
// deterministic so identical runs produce byte-identical files.

namespace ionlab {

// Fixed-precision decimal rendering (no locale, no exponent).
std::string format_fixed(double value, int precision);

// Histogram trace, header `bin_start_us,counts`.
void write_histogram_csv(const McsHistogram& hist, const std::string& path);
McsHistogram read_histogram_csv(const std::string& path);

// Model evaluation, header `t_us,rate`.
void write_rate_csv(const Eigen::ArrayXd& t_us, const Eigen::ArrayXd& rate,
                    const std::string& path);

// Sweep results, header `tau_over_T,x_a_um,sigma_um,converged`. Rows with
// converged=0 carry the failed point's best estimate and are skipped by
// read_sweep_csv.
struct SweepRow {
  SweepPoint point;
  bool converged = true;
};
void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path);
std::vector<SweepPoint> read_sweep_csv(const std::string& path);

// Voltage calibration points, header `voltage_v,x_d_um,sigma_um`.
void write_voltage_csv(const std::vector<VoltagePoint>& points,
                       const std::string& path);
std::vector<VoltagePoint> read_voltage_csv(const std::string& path);

// FNV-1a 64-bit digest of a file's bytes, rendered as "fnv1a64:<hex>".
std::string file_digest(const std::string& path);

// Reproduction record written next to every command's outputs: the resolved
// config, seed, tool version, command line, and a digest per emitted file.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::ordered_json config() const;
  void set_config(const nlohmann::ordered_json& cfg);

  // Registers an already-written output file; stores its digest.
  void add_output(const std::string& path);

  void write(const std::string& path) const;

  std::map<std::string, std::string> outputs;  // basename -> digest

 private:
  std::string config_text_;
};

// JSON dump of a fit result (schema ionlab.fit_result/1).
nlohmann::ordered_json fit_result_json(const FitResult& result,
                                       const std::vector<std::string>& names);

}  // namespace ionlab
