#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ionlab/core.hpp"
#include "ionlab/fluorescence.hpp"
#include "ionlab/histogram.hpp"

// Weighted nonlinear least squares (Levenberg-Marquardt with central-
// difference Jacobians) and the three fit models used by the analysis:
// fluorescence trace, pulse-duration sweep, and sqrt voltage calibration.

namespace ionlab {

// Degenerate parametrization: the damped normal matrix cannot be solved.
struct SingularNormalMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Trace fit window shorter than 3 oscillation periods.
struct WindowTooShort : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// Sweep with all points at integer tau/T, where the model vanishes.
struct DegenerateSweep : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// sqrt fit ended with a data point at or below the fitted offset.
struct DomainViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitResult {
  Eigen::VectorXd estimates;
  Eigen::VectorXd sigma;            // 1-sigma uncertainties
  Eigen::MatrixXd covariance;       // (J^T W J)^-1 scaled by reduced chi^2
  double residual_norm = 0.0;       // ||weighted residuals||_2 at the solution
  bool converged = false;
  int n_iterations = 0;
  std::vector<double> objective_history;  // chi^2 after each accepted step
};

struct LmOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;     // relative to the initial gradient norm
  double step_tolerance = 1e-10;        // relative step size
  double jacobian_relative_step = 1e-6;
  double initial_lambda = 1e-3;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central differences, per-parameter step relative_step * max(|p_i|, 1).
Eigen::MatrixXd numerical_jacobian(const ResidualFn& residuals,
                                   const Eigen::VectorXd& params,
                                   double relative_step = 1e-6);

// Minimizes ||residuals(p)||^2. Residuals carry their own weights. On
// non-convergence the best point found is returned with converged = false.
FitResult levenberg_marquardt(const ResidualFn& residuals,
                              const Eigen::VectorXd& init,
                              const LmOptions& options = {});

// ---- Trace fit -----------------------------------------------------------

struct TraceFit {
  FitResult fit;            // parameters: v, phi, scale, background
  OscillationModel model;   // best-fit model, v normalized to >= 0
  double amplitude = 0.0;       // x_a = v/omega_a, m
  double amplitude_sigma = 0.0; // m
};

// Fits (v, phi, scale, background) to the net counts of hist inside
// [window_start, window_end] with Poisson weights sqrt(max(counts, 1));
// delta, Gamma, s, omega_a stay fixed at the configured values. The window
// must start at detection onset and span >= 3 oscillation periods.
// amplitude_hint, when given, seeds the velocity search at hint * omega_a.
TraceFit fit_trace(const McsHistogram& hist, double window_start,
                   double window_end, const TrapConfig& trap,
                   const DetectionLaser& laser,
                   std::optional<double> amplitude_hint = std::nullopt);

// ---- Pulse-duration sweep fit --------------------------------------------

struct SweepPoint {
  double tau_over_period = 0.0;  // dimensionless
  double amplitude = 0.0;        // x_a, m
  double sigma = 0.0;            // m, > 0
};

struct SweepFit {
  FitResult fit;  // parameters: x_d [, period_scale]
  double x_d = 0.0;
  double x_d_sigma = 0.0;
  double period_scale = 1.0;       // multiplicative period correction
  double period_scale_sigma = 0.0;
};

// Weighted fit of x_a(r) = x_d sqrt(2 (1 - cos(2 pi r / c))) over sweep
// points r = tau/T; c is the optional period correction (fit_period).
// Requires >= 5 points spanning >= half a period.
SweepFit fit_pulse_sweep(const std::vector<SweepPoint>& points,
                         bool fit_period = false);

// ---- sqrt voltage calibration --------------------------------------------

struct VoltagePoint {
  double voltage = 0.0;       // V
  double displacement = 0.0;  // m
  double sigma = 0.0;         // m, > 0
};

struct VoltageFit {
  FitResult fit;  // parameters: a [, V0]
  double coefficient = 0.0;  // a, m per sqrt(V)
  double coefficient_sigma = 0.0;
  double v0 = 0.0;
  double v0_sigma = 0.0;
};

// Fits x(V) = a sqrt(V - V0); V0 fixed at 0 unless fit_offset. The sqrt
// argument is clamped at 0 during iteration; a data point at or below the
// fitted V0 raises DomainViolation. Requires >= 3 points.
VoltageFit fit_sqrt_voltage(const std::vector<VoltagePoint>& points,
                            bool fit_offset = false);

}  // namespace ionlab
