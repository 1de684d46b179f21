#include "ionlab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "ionlab/version.hpp"

namespace ionlab {

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& s, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument(where + ": not a number: '" + s + "'");
  return value;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument(where + ": not an integer: '" + s + "'");
  return value;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

void check_write(const std::ofstream& out, const std::string& path) {
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string row_context(const std::string& path, int lineno) {
  return path + ":" + std::to_string(lineno);
}

}  // namespace

std::string format_fixed(double value, int precision) {
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::fixed, precision);
  if (res.ec != std::errc())
    throw std::runtime_error("format_fixed: value out of range");
  return {buf, res.ptr};
}

void write_histogram_csv(const McsHistogram& hist, const std::string& path) {
  hist.validate();
  auto out = open_out(path);
  out << "bin_start_us,counts\n";
  for (Eigen::Index i = 0; i < hist.n_bins(); ++i)
    out << format_fixed(static_cast<double>(i) * hist.bin_width * 1e6, 6)
        << ',' << hist.counts[i] << '\n';
  check_write(out, path);
}

McsHistogram read_histogram_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  strip_cr(line);
  if (line != "bin_start_us,counts")
    throw std::invalid_argument(path + ": expected header 'bin_start_us,counts'");

  std::vector<double> starts;
  std::vector<std::int64_t> counts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw std::invalid_argument(row_context(path, lineno) +
                               ": expected 2 fields");
    starts.push_back(parse_double(fields[0], row_context(path, lineno)));
    counts.push_back(parse_int(fields[1], row_context(path, lineno)));
  }
  if (starts.size() < 2)
    throw std::invalid_argument(path + ": need at least 2 bins");

  const auto n = static_cast<Eigen::Index>(starts.size());
  const double width_us =
      (starts.back() - starts.front()) / static_cast<double>(n - 1);
  if (!(width_us > 0.0))
    throw std::invalid_argument(path + ": bin starts must increase");
  for (std::size_t i = 1; i < starts.size(); ++i) {
    const double gap = starts[i] - starts[i - 1];
    if (std::abs(gap - width_us) > 1e-6 * width_us + 1e-12)
      throw std::invalid_argument(path + ": non-uniform bin grid near row " +
                               std::to_string(i + 1));
  }

  McsHistogram hist;
  hist.bin_width = width_us * 1e-6;
  hist.counts.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) hist.counts[i] = counts[i];
  hist.n_sequences = 1;    // not carried by the CSV; see the run manifest
  hist.background_rate = 0.0;
  hist.validate();
  return hist;
}

void write_rate_csv(const Eigen::ArrayXd& t_us, const Eigen::ArrayXd& rate,
                    const std::string& path) {
  if (t_us.size() != rate.size())
    throw std::invalid_argument("write_rate_csv: size mismatch");
  auto out = open_out(path);
  out << "t_us,rate\n";
  for (Eigen::Index i = 0; i < t_us.size(); ++i)
    out << format_fixed(t_us[i], 6) << ',' << format_fixed(rate[i], 6)
        << '\n';
  check_write(out, path);
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  auto out = open_out(path);
  out << "tau_over_T,x_a_um,sigma_um,converged\n";
  for (const auto& row : rows)
    out << format_fixed(row.point.tau_over_period, 6) << ','
        << format_fixed(row.point.amplitude * 1e6, 6) << ','
        << format_fixed(row.point.sigma * 1e6, 6) << ','
        << (row.converged ? 1 : 0) << '\n';
  check_write(out, path);
}

std::vector<SweepPoint> read_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  strip_cr(line);
  bool has_flag = false;
  if (line == "tau_over_T,x_a_um,sigma_um,converged")
    has_flag = true;
  else if (line != "tau_over_T,x_a_um,sigma_um")
    throw std::invalid_argument(path +
                             ": expected header 'tau_over_T,x_a_um,sigma_um"
                             "[,converged]'");

  std::vector<SweepPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::size_t expected = has_flag ? 4 : 3;
    if (fields.size() != expected)
      throw std::invalid_argument(row_context(path, lineno) + ": expected " +
                               std::to_string(expected) + " fields");
    if (has_flag && parse_int(fields[3], row_context(path, lineno)) == 0)
      continue;  // flagged row: the fit did not converge there
    SweepPoint pt;
    pt.tau_over_period = parse_double(fields[0], row_context(path, lineno));
    pt.amplitude = parse_double(fields[1], row_context(path, lineno)) * 1e-6;
    pt.sigma = parse_double(fields[2], row_context(path, lineno)) * 1e-6;
    points.push_back(pt);
  }
  return points;
}

void write_voltage_csv(const std::vector<VoltagePoint>& points,
                       const std::string& path) {
  auto out = open_out(path);
  out << "voltage_v,x_d_um,sigma_um\n";
  for (const auto& pt : points)
    out << format_fixed(pt.voltage, 6) << ','
        << format_fixed(pt.displacement * 1e6, 6) << ','
        << format_fixed(pt.sigma * 1e6, 6) << '\n';
  check_write(out, path);
}

std::vector<VoltagePoint> read_voltage_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  strip_cr(line);
  if (line != "voltage_v,x_d_um,sigma_um")
    throw std::invalid_argument(path +
                             ": expected header 'voltage_v,x_d_um,sigma_um'");
  std::vector<VoltagePoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3)
      throw std::invalid_argument(row_context(path, lineno) +
                               ": expected 3 fields");
    VoltagePoint pt;
    pt.voltage = parse_double(fields[0], row_context(path, lineno));
    pt.displacement = parse_double(fields[1], row_context(path, lineno)) * 1e-6;
    pt.sigma = parse_double(fields[2], row_context(path, lineno)) * 1e-6;
    points.push_back(pt);
  }
  return points;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::uint64_t h = 14695981039346656037ULL;  // FNV offset basis
  char buf[65536];
  for (;;) {
    in.read(buf, sizeof(buf));
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;  // FNV prime
    }
    if (n < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  if (in.bad()) throw std::runtime_error("read failed: " + path);
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

nlohmann::ordered_json RunManifest::config() const {
  if (config_text_.empty()) return nlohmann::ordered_json::object();
  return nlohmann::ordered_json::parse(config_text_);
}

void RunManifest::set_config(const nlohmann::ordered_json& cfg) {
  config_text_ = cfg.dump();
}

void RunManifest::add_output(const std::string& path) {
  outputs[std::filesystem::path(path).filename().string()] =
      file_digest(path);
}

void RunManifest::write(const std::string& path) const {
  nlohmann::ordered_json j;
  j["tool"] = "ionlab";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["threads"] = threads;
  j["config"] = config();
  nlohmann::ordered_json outs = nlohmann::ordered_json::object();
  for (const auto& [name, digest] : outputs) outs[name] = digest;
  j["outputs"] = std::move(outs);
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  check_write(out, path);
}

nlohmann::ordered_json fit_result_json(const FitResult& result,
                                       const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != result.estimates.size())
    throw std::invalid_argument("fit_result_json: one name per parameter");
  nlohmann::ordered_json j;
  j["schema"] = "ionlab.fit_result/1";
  j["converged"] = result.converged;
  j["n_iterations"] = result.n_iterations;
  j["residual_norm"] = result.residual_norm;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    params[names[i]] = nlohmann::ordered_json{
        {"value", result.estimates[idx]},
        {"sigma", result.sigma[idx]},
    };
  }
  j["parameters"] = std::move(params);
  nlohmann::ordered_json cov = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < result.covariance.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < result.covariance.cols(); ++c)
      row.push_back(result.covariance(r, c));
    cov.push_back(std::move(row));
  }
  j["covariance"] = std::move(cov);
  return j;
}

}  // namespace ionlab
