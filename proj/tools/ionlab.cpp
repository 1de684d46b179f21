// Command-line front end: simulation, model evaluation, fitting, sweeps,
// and sensitivity estimates, with CSV outputs and JSON run manifests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ionlab/config.hpp"
#include "ionlab/constants.hpp"
#include "ionlab/dynamics.hpp"
#include "ionlab/fitting.hpp"
#include "ionlab/fluorescence.hpp"
#include "ionlab/io.hpp"
#include "ionlab/rng.hpp"
#include "ionlab/sensitivity.hpp"
#include "ionlab/version.hpp"

namespace {

using namespace ionlab;

// Derives an independent accumulation seed for sweep point i. A stride
// distinct from the per-sequence one keeps point streams and sequence
// streams from ever landing on the same splitmix input.
std::uint64_t point_seed(std::uint64_t master, std::uint64_t i) {
  return mix64(master + 0xD1B54A32D192ED03ULL * (i + 1));
}

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 12345;
  int threads = 0;  // <= 0: hardware concurrency
  std::string out;  // output directory; default depends on the command
};

struct Context {
  GlobalArgs args;
  SimulationConfig cfg;
  std::string command_line;
  bool all_converged = true;
};

SimulationConfig load_config(const GlobalArgs& args) {
  if (args.config_path.empty()) return SimulationConfig{};
  return SimulationConfig::load(args.config_path);
}

std::filesystem::path prepare_outdir(const GlobalArgs& args,
                                     const std::string& fallback) {
  std::filesystem::path dir =
      args.out.empty() ? std::filesystem::path("ionlab-out") / fallback
                       : std::filesystem::path(args.out);
  std::filesystem::create_directories(dir);
  return dir;
}

RunManifest make_manifest(const Context& ctx) {
  RunManifest manifest;
  manifest.command = ctx.command_line;
  manifest.seed = ctx.args.seed;
  manifest.threads = ctx.args.threads;
  manifest.set_config(ctx.cfg.to_json());
  return manifest;
}

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::ordered_json trace_fit_json(const TraceFit& fit) {
  auto j = fit_result_json(
      fit.fit,
      {"peak_velocity_m_per_s", "phase_rad", "scale", "background_counts"});
  j["amplitude_um"] = nlohmann::ordered_json{
      {"value", fit.amplitude * 1e6},
      {"sigma", fit.amplitude_sigma * 1e6},
  };
  return j;
}

McsHistogram accumulate(const Context& ctx, const SequenceTimeline& timeline,
                        std::int64_t n_sequences, std::uint64_t seed) {
  AccumulationOptions options;
  options.n_threads = ctx.args.threads;
  return run_accumulation(timeline, ctx.cfg.trap, ctx.cfg.laser, n_sequences,
                          ctx.cfg.accumulation.bin_width, seed, options);
}

// ---- simulate-trace --------------------------------------------------------

void cmd_simulate_trace(Context& ctx) {
  const auto dir = prepare_outdir(ctx.args, "simulate-trace");
  const McsHistogram hist =
      accumulate(ctx, ctx.cfg.timeline, ctx.cfg.accumulation.n_sequences,
                 ctx.args.seed);
  const auto trace_path = (dir / "trace.csv").string();
  write_histogram_csv(hist, trace_path);

  auto manifest = make_manifest(ctx);
  manifest.add_output(trace_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "wrote " << trace_path << " (" << hist.n_bins() << " bins, "
            << hist.counts.sum() << " counts)\n";
}

// ---- eval-model ------------------------------------------------------------

struct EvalModelArgs {
  double x_a_um = 8.5;
  double phase = 0.0;
  double t_max_us = 0.0;  // 0: five trap periods
  int n_points = 1000;
};

void cmd_eval_model(Context& ctx, const EvalModelArgs& em) {
  const auto dir = prepare_outdir(ctx.args, "eval-model");
  const double omega = ctx.cfg.trap.omega_a();
  const OscillationModel model(em.x_a_um * 1e-6 * omega, em.phase, omega,
                               ctx.cfg.laser, 1.0, 0.0);
  const double t_max_us =
      em.t_max_us > 0.0 ? em.t_max_us : 5.0 * ctx.cfg.trap.period() * 1e6;
  if (em.n_points < 2)
    throw std::invalid_argument("eval-model: need at least 2 points");
  Eigen::ArrayXd t_us(em.n_points);
  Eigen::ArrayXd rate(em.n_points);
  for (int i = 0; i < em.n_points; ++i) {
    t_us[i] = t_max_us * static_cast<double>(i) /
              static_cast<double>(em.n_points - 1);
    rate[i] = model_rate(t_us[i] * 1e-6, model);
  }
  const auto model_path = (dir / "model.csv").string();
  write_rate_csv(t_us, rate, model_path);

  auto manifest = make_manifest(ctx);
  manifest.add_output(model_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "wrote " << model_path << "\n";
}

// ---- fit-trace -------------------------------------------------------------

struct FitTraceArgs {
  std::string input;
  double window_periods = 0.0;  // 0: config default
  double hint_um = 0.0;         // 0: no hint
};

void cmd_fit_trace(Context& ctx, const FitTraceArgs& ft) {
  const auto dir = prepare_outdir(ctx.args, "fit-trace");
  const McsHistogram hist = read_histogram_csv(ft.input);
  const double periods =
      ft.window_periods > 0.0 ? ft.window_periods : ctx.cfg.fit.window_periods;
  const double window_end = periods * ctx.cfg.trap.period();
  std::optional<double> hint;
  if (ft.hint_um > 0.0) hint = ft.hint_um * 1e-6;

  const TraceFit fit =
      fit_trace(hist, 0.0, window_end, ctx.cfg.trap, ctx.cfg.laser, hint);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;

  const auto fit_path = (dir / "trace_fit.json").string();
  write_json(trace_fit_json(fit), fit_path);
  auto manifest = make_manifest(ctx);
  manifest.add_output(fit_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "x_a = " << fit.amplitude * 1e6 << " +- "
            << fit.amplitude_sigma * 1e6 << " um ("
            << (fit.fit.converged ? "converged" : "NOT converged") << ")\n";
}

// ---- fit-sweep -------------------------------------------------------------

struct FitSweepArgs {
  std::string input;
  bool fit_period = false;
};

void cmd_fit_sweep(Context& ctx, const FitSweepArgs& fs) {
  const auto dir = prepare_outdir(ctx.args, "fit-sweep");
  const auto points = read_sweep_csv(fs.input);
  const SweepFit fit = fit_pulse_sweep(points, fs.fit_period);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;

  auto j = fit_result_json(fit.fit, fs.fit_period
                                        ? std::vector<std::string>{
                                              "x_d_m", "period_scale"}
                                        : std::vector<std::string>{"x_d_m"});
  j["x_d_um"] = nlohmann::ordered_json{{"value", fit.x_d * 1e6},
                                       {"sigma", fit.x_d_sigma * 1e6}};
  const auto fit_path = (dir / "sweep_fit.json").string();
  write_json(j, fit_path);
  auto manifest = make_manifest(ctx);
  manifest.add_output(fit_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "x_d = " << fit.x_d * 1e6 << " +- " << fit.x_d_sigma * 1e6
            << " um (" << (fit.fit.converged ? "converged" : "NOT converged")
            << ")\n";
}

// ---- fit-voltage -----------------------------------------------------------

struct FitVoltageArgs {
  std::string input;
  bool fit_offset = false;
};

void cmd_fit_voltage(Context& ctx, const FitVoltageArgs& fv) {
  const auto dir = prepare_outdir(ctx.args, "fit-voltage");
  const auto points = read_voltage_csv(fv.input);
  const VoltageFit fit = fit_sqrt_voltage(points, fv.fit_offset);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;

  auto j = fit_result_json(
      fit.fit, fv.fit_offset
                   ? std::vector<std::string>{"coefficient_m_per_sqrt_v",
                                              "v0_v"}
                   : std::vector<std::string>{"coefficient_m_per_sqrt_v"});
  j["coefficient_um_per_sqrt_v"] = nlohmann::ordered_json{
      {"value", fit.coefficient * 1e6},
      {"sigma", fit.coefficient_sigma * 1e6},
  };
  const auto fit_path = (dir / "voltage_fit.json").string();
  write_json(j, fit_path);
  auto manifest = make_manifest(ctx);
  manifest.add_output(fit_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "a = " << fit.coefficient * 1e6 << " +- "
            << fit.coefficient_sigma * 1e6 << " um/sqrt(V) ("
            << (fit.fit.converged ? "converged" : "NOT converged") << ")\n";
}

// ---- sweep-tau -------------------------------------------------------------

std::vector<double> tau_grid(const SweepConfig& sweep) {
  if (!(sweep.tau_over_t_step > 0.0))
    throw std::invalid_argument("sweep: tau_over_t_step must be > 0");
  if (sweep.tau_over_t_max < sweep.tau_over_t_min)
    throw std::invalid_argument("sweep: empty tau grid");
  std::vector<double> grid;
  const auto n = static_cast<std::int64_t>(
      std::floor((sweep.tau_over_t_max - sweep.tau_over_t_min) /
                     sweep.tau_over_t_step +
                 1e-9));
  for (std::int64_t i = 0; i <= n; ++i)
    grid.push_back(sweep.tau_over_t_min +
                   static_cast<double>(i) * sweep.tau_over_t_step);
  return grid;
}

std::vector<SweepRow> run_tau_sweep(Context& ctx,
                                    const std::vector<double>& grid) {
  const double period = ctx.cfg.trap.period();
  const double x_d = ctx.cfg.timeline.pulse.x_d();
  const double window_end = ctx.cfg.fit.window_periods * period;

  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid[i];
    SequenceTimeline timeline = ctx.cfg.timeline;
    timeline.pulse = DisplacementPulse(x_d, r * period);
    const McsHistogram hist = accumulate(
        ctx, timeline, ctx.cfg.sweep.n_sequences, point_seed(ctx.args.seed, i));

    SweepRow row;
    row.point.tau_over_period = r;
    std::optional<double> hint;
    const double expected = 2.0 * x_d * std::abs(std::sin(kPi * r));
    if (expected > 0.05 * x_d) hint = expected;
    try {
      const TraceFit fit =
          fit_trace(hist, 0.0, window_end, ctx.cfg.trap, ctx.cfg.laser, hint);
      row.point.amplitude = fit.amplitude;
      row.point.sigma = fit.amplitude_sigma;
      row.converged = fit.fit.converged;
    } catch (const SingularNormalMatrix&) {
      row.converged = false;
    }
    ctx.all_converged = ctx.all_converged && row.converged;
    rows.push_back(row);
    std::cout << "tau/T = " << r << ": x_a = " << row.point.amplitude * 1e6
              << " +- " << row.point.sigma * 1e6 << " um"
              << (row.converged ? "" : " [no fit]") << "\n";
  }
  return rows;
}

void cmd_sweep_tau(Context& ctx) {
  const auto dir = prepare_outdir(ctx.args, "sweep-tau");
  const auto grid = tau_grid(ctx.cfg.sweep);
  const auto rows = run_tau_sweep(ctx, grid);
  const auto sweep_path = (dir / "sweep.csv").string();
  write_sweep_csv(rows, sweep_path);
  auto manifest = make_manifest(ctx);
  manifest.add_output(sweep_path);
  manifest.write((dir / "manifest.json").string());
  std::cout << "wrote " << sweep_path << "\n";
}

// ---- pipeline-figure -------------------------------------------------------

void pipeline_1c(Context& ctx, const std::filesystem::path& dir,
                 RunManifest& manifest) {
  const McsHistogram hist =
      accumulate(ctx, ctx.cfg.timeline, ctx.cfg.accumulation.n_sequences,
                 ctx.args.seed);
  const auto trace_path = (dir / "trace.csv").string();
  write_histogram_csv(hist, trace_path);
  manifest.add_output(trace_path);

  const double period = ctx.cfg.trap.period();
  const double window_end = ctx.cfg.fit.window_periods * period;
  const double r = ctx.cfg.timeline.pulse.tau() / period;
  const double expected =
      2.0 * ctx.cfg.timeline.pulse.x_d() * std::abs(std::sin(kPi * r));
  std::optional<double> hint;
  if (expected > 0.05 * ctx.cfg.timeline.pulse.x_d()) hint = expected;

  const TraceFit fit =
      fit_trace(hist, 0.0, window_end, ctx.cfg.trap, ctx.cfg.laser, hint);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;
  const auto fit_path = (dir / "trace_fit.json").string();
  write_json(trace_fit_json(fit), fit_path);
  manifest.add_output(fit_path);
  std::cout << "x_a = " << fit.amplitude * 1e6 << " +- "
            << fit.amplitude_sigma * 1e6 << " um\n";
}

void pipeline_sweep(Context& ctx, const std::filesystem::path& dir,
                    RunManifest& manifest) {
  const auto grid = tau_grid(ctx.cfg.sweep);
  const auto rows = run_tau_sweep(ctx, grid);
  const auto sweep_path = (dir / "sweep.csv").string();
  write_sweep_csv(rows, sweep_path);
  manifest.add_output(sweep_path);

  std::vector<SweepPoint> points;
  for (const auto& row : rows)
    if (row.converged) points.push_back(row.point);
  const SweepFit fit = fit_pulse_sweep(points, false);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;

  auto j = fit_result_json(fit.fit, {"x_d_m"});
  j["x_d_um"] = nlohmann::ordered_json{{"value", fit.x_d * 1e6},
                                       {"sigma", fit.x_d_sigma * 1e6}};
  const auto fit_path = (dir / "sweep_fit.json").string();
  write_json(j, fit_path);
  manifest.add_output(fit_path);
  std::cout << "x_d = " << fit.x_d * 1e6 << " +- " << fit.x_d_sigma * 1e6
            << " um\n";
}

// Synthetic stand-in for the electrode physics: displacement a sqrt(V),
// anchored so 0.6 V maps to 10.5 um.
constexpr double kVoltageCalibration = 10.5e-6 / 0.7745966692414834;  // sqrt(0.6)

void pipeline_3b(Context& ctx, const std::filesystem::path& dir,
                 RunManifest& manifest) {
  const double period = ctx.cfg.trap.period();
  const double window_end = ctx.cfg.fit.window_periods * period;

  std::vector<VoltagePoint> points;
  for (int i = 0; i < 6; ++i) {
    const double voltage = 0.1 * static_cast<double>(i + 1);
    const double x_d = kVoltageCalibration * std::sqrt(voltage);
    SequenceTimeline timeline = ctx.cfg.timeline;
    timeline.pulse = DisplacementPulse(x_d, 0.5 * period);
    const McsHistogram hist =
        accumulate(ctx, timeline, ctx.cfg.sweep.n_sequences,
                   point_seed(ctx.args.seed, static_cast<std::uint64_t>(i)));
    const TraceFit fit = fit_trace(hist, 0.0, window_end, ctx.cfg.trap,
                                   ctx.cfg.laser, 2.0 * x_d);
    ctx.all_converged = ctx.all_converged && fit.fit.converged;
    VoltagePoint pt;
    pt.voltage = voltage;
    pt.displacement = 0.5 * fit.amplitude;  // tau = T/2: amplitude is 2 x_d
    pt.sigma = 0.5 * fit.amplitude_sigma;
    points.push_back(pt);
    std::cout << "V = " << voltage << ": x_d = " << pt.displacement * 1e6
              << " +- " << pt.sigma * 1e6 << " um\n";
  }

  const auto voltage_path = (dir / "voltage.csv").string();
  write_voltage_csv(points, voltage_path);
  manifest.add_output(voltage_path);

  const VoltageFit fit = fit_sqrt_voltage(points, false);
  ctx.all_converged = ctx.all_converged && fit.fit.converged;
  auto j = fit_result_json(fit.fit, {"coefficient_m_per_sqrt_v"});
  j["coefficient_um_per_sqrt_v"] = nlohmann::ordered_json{
      {"value", fit.coefficient * 1e6},
      {"sigma", fit.coefficient_sigma * 1e6},
  };
  const auto fit_path = (dir / "voltage_fit.json").string();
  write_json(j, fit_path);
  manifest.add_output(fit_path);
  std::cout << "a = " << fit.coefficient * 1e6 << " +- "
            << fit.coefficient_sigma * 1e6 << " um/sqrt(V)\n";
}

void cmd_pipeline_figure(Context& ctx, const std::string& id) {
  const auto dir = prepare_outdir(ctx.args, "fig-" + id);
  auto manifest = make_manifest(ctx);
  if (id == "1c") {
    pipeline_1c(ctx, dir, manifest);
  } else if (id == "2") {
    pipeline_sweep(ctx, dir, manifest);
  } else if (id == "3a") {
    ctx.cfg.timeline.pulse =
        DisplacementPulse(10.5e-6, ctx.cfg.timeline.pulse.tau());
    manifest.set_config(ctx.cfg.to_json());
    pipeline_sweep(ctx, dir, manifest);
  } else {
    pipeline_3b(ctx, dir, manifest);
  }
  manifest.write((dir / "manifest.json").string());
}

// ---- sensitivity -----------------------------------------------------------

struct SensitivityArgs {
  std::int64_t n_kicks = 100;
  double wavelength_nm = 369.5;
  double x_d_um = 16.9;
  double dt_ms = 1.0;
  std::int64_t repetitions = 1;
};

void cmd_sensitivity(const SensitivityArgs& sa) {
  GyroParams params;
  params.n_kicks = sa.n_kicks;
  params.kick_wavenumber = kTwoPi / (sa.wavelength_nm * 1e-9);
  params.displacement = sa.x_d_um * 1e-6;
  params.interference_time = sa.dt_ms * 1e-3;
  params.n_repetitions = sa.repetitions;

  const double s = gyro_sensitivity(params);
  const double averaged = averaged_sensitivity(s, sa.repetitions);
  nlohmann::ordered_json j{
      {"rad_per_sqrt_s", s},
      {"deg_per_sqrt_hour", rad_per_sqrt_s_to_deg_per_sqrt_hour(s)},
      {"repetitions", sa.repetitions},
      {"averaged_rad_per_sqrt_s", averaged},
      {"averaged_deg_per_sqrt_hour",
       rad_per_sqrt_s_to_deg_per_sqrt_hour(averaged)},
  };
  std::cout << j.dump(2) << "\n";
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapped-ion oscillation simulator and analysis toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON configuration file");
  app.add_option("--seed", args.seed, "master random seed")
      ->default_val(args.seed);
  app.add_option("--threads", args.threads,
                 "worker threads (0 = hardware concurrency)")
      ->envname("IONLAB_THREADS")
      ->default_val(args.threads);
  app.add_option("--out", args.out, "output directory");
  app.set_version_flag("--version", ionlab::kVersion);

  auto* sc_sim = app.add_subcommand("simulate-trace",
                                    "accumulate a fluorescence histogram");
  auto* sc_eval =
      app.add_subcommand("eval-model", "evaluate the analytic rate model");
  EvalModelArgs em;
  sc_eval->add_option("--x-a-um", em.x_a_um, "oscillation amplitude, um")
      ->default_val(em.x_a_um);
  sc_eval->add_option("--phase", em.phase, "oscillation phase, rad")
      ->default_val(em.phase);
  sc_eval->add_option("--t-max-us", em.t_max_us,
                      "trace length, us (default: 5 trap periods)");
  sc_eval->add_option("--points", em.n_points, "number of samples")
      ->default_val(em.n_points);

  auto* sc_fit_trace =
      app.add_subcommand("fit-trace", "fit the oscillation model to a trace");
  FitTraceArgs ft;
  sc_fit_trace->add_option("--in", ft.input, "histogram CSV")->required();
  sc_fit_trace->add_option("--window-periods", ft.window_periods,
                           "fit window length in trap periods");
  sc_fit_trace->add_option("--hint-um", ft.hint_um,
                           "starting amplitude guess, um");

  auto* sc_fit_sweep =
      app.add_subcommand("fit-sweep", "fit the pulse-duration response");
  FitSweepArgs fs;
  sc_fit_sweep->add_option("--in", fs.input, "sweep CSV")->required();
  sc_fit_sweep->add_flag("--fit-period", fs.fit_period,
                         "fit a period correction too");

  auto* sc_fit_voltage =
      app.add_subcommand("fit-voltage", "fit the sqrt voltage calibration");
  FitVoltageArgs fv;
  sc_fit_voltage->add_option("--in", fv.input, "voltage CSV")->required();
  sc_fit_voltage->add_flag("--fit-offset", fv.fit_offset,
                           "fit a voltage offset too");

  auto* sc_sweep =
      app.add_subcommand("sweep-tau", "simulate and fit a tau/T grid");

  auto* sc_sens =
      app.add_subcommand("sensitivity", "gyroscope sensitivity estimate");
  SensitivityArgs sa;
  sc_sens->add_option("--n-kicks", sa.n_kicks, "spin-dependent kicks")
      ->default_val(sa.n_kicks);
  sc_sens->add_option("--wavelength-nm", sa.wavelength_nm,
                      "kick laser wavelength, nm")
      ->default_val(sa.wavelength_nm);
  sc_sens->add_option("--x-d-um", sa.x_d_um, "trap displacement, um")
      ->default_val(sa.x_d_um);
  sc_sens->add_option("--dt-ms", sa.dt_ms, "interference time, ms")
      ->default_val(sa.dt_ms);
  sc_sens->add_option("--repetitions", sa.repetitions, "repeated measurements")
      ->default_val(sa.repetitions);

  auto* sc_fig = app.add_subcommand("pipeline-figure",
                                    "one-shot figure reproduction pipeline");
  std::string fig_id;
  sc_fig->add_option("id", fig_id, "figure id")
      ->required()
      ->check(CLI::IsMember({"1c", "2", "3a", "3b"}));

  for (auto* sub : {sc_sim, sc_eval, sc_fit_trace, sc_fit_sweep,
                    sc_fit_voltage, sc_sweep, sc_sens, sc_fig})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Context ctx;
    ctx.args = args;
    ctx.command_line = join_args(argc, argv);

    if (sc_sens->parsed()) {
      cmd_sensitivity(sa);
      return 0;
    }

    ctx.cfg = load_config(args);
    if (sc_sim->parsed()) cmd_simulate_trace(ctx);
    if (sc_eval->parsed()) cmd_eval_model(ctx, em);
    if (sc_fit_trace->parsed()) cmd_fit_trace(ctx, ft);
    if (sc_fit_sweep->parsed()) cmd_fit_sweep(ctx, fs);
    if (sc_fit_voltage->parsed()) cmd_fit_voltage(ctx, fv);
    if (sc_sweep->parsed()) cmd_sweep_tau(ctx);
    if (sc_fig->parsed()) cmd_pipeline_figure(ctx, fig_id);

    return ctx.all_converged ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
