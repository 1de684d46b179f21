#include "ionlab/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ionlab/constants.hpp"

namespace ionlab {

namespace {

// Pseudo-inverse of a symmetric PSD matrix; eigenvalues below the spectral
// cutoff map to 0 so degenerate directions carry zero (not infinite) weight.
Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& w = es.eigenvalues();
  const double cutoff =
      w.cwiseAbs().maxCoeff() * static_cast<double>(a.rows()) * 1e-14;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > cutoff && w[i] > 0.0) inv[i] = 1.0 / w[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double max_relative_step(const Eigen::VectorXd& dp, const Eigen::VectorXd& p) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < dp.size(); ++i)
    m = std::max(m, std::abs(dp[i]) / std::max(std::abs(p[i]), 1.0));
  return m;
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const ResidualFn& residuals,
                                   const Eigen::VectorXd& params,
                                   double relative_step) {
  const Eigen::Index n = params.size();
  if (n == 0)
    throw std::invalid_argument("numerical_jacobian: empty parameter vector");
  Eigen::VectorXd p = params;
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = relative_step * std::max(std::abs(params[i]), 1.0);
    p[i] = params[i] + h;
    const Eigen::VectorXd plus = residuals(p);
    p[i] = params[i] - h;
    const Eigen::VectorXd minus = residuals(p);
    p[i] = params[i];
    if (jac.size() == 0) jac.resize(plus.size(), n);
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

FitResult levenberg_marquardt(const ResidualFn& residuals,
                              const Eigen::VectorXd& init,
                              const LmOptions& options) {
  if (init.size() == 0)
    throw std::invalid_argument("levenberg_marquardt: empty parameter vector");

  Eigen::VectorXd p = init;
  Eigen::VectorXd r = residuals(p);
  if (!r.allFinite())
    throw std::invalid_argument(
        "levenberg_marquardt: residuals not finite at the initial point");
  double chi2 = r.squaredNorm();

  FitResult result;
  result.objective_history.push_back(chi2);

  Eigen::MatrixXd jac =
      numerical_jacobian(residuals, p, options.jacobian_relative_step);
  Eigen::VectorXd grad = jac.transpose() * r;

  {
    // A parameter with no effect at all cannot be damped into solvability:
    // its normal-matrix row is identically zero.
    const Eigen::MatrixXd a0 = jac.transpose() * jac;
    if (!a0.allFinite())
      throw SingularNormalMatrix(
          "levenberg_marquardt: non-finite normal matrix at the initial point");
    for (Eigen::Index i = 0; i < a0.rows(); ++i)
      if (a0(i, i) == 0.0)
        throw SingularNormalMatrix(
            "levenberg_marquardt: parameter " + std::to_string(i) +
            " has no effect on the residuals");
  }

  const double grad_threshold = options.gradient_tolerance * grad.norm();
  double lambda = options.initial_lambda;
  bool converged = false;
  int accepted = 0;

  // Marquardt damping: scale the normal-matrix diagonal by (1 + lambda).
  const auto try_step = [&](double lam, Eigen::VectorXd& dp) -> bool {
    Eigen::MatrixXd a = jac.transpose() * jac;
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, i) *= (1.0 + lam);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) return false;
    dp = lu.solve(-grad);
    return dp.allFinite();
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (grad.norm() <= grad_threshold) {
      converged = true;
      break;
    }

    // Grow lambda until a step improves the objective.
    Eigen::VectorXd dp;
    Eigen::VectorXd r_try;
    double chi2_try = 0.0;
    bool have_step = false;
    while (lambda <= 1e14) {
      if (try_step(lambda, dp)) {
        r_try = residuals(p + dp);
        if (r_try.allFinite()) {
          chi2_try = r_try.squaredNorm();
          if (chi2_try <= chi2) {
            have_step = true;
            break;
          }
        }
      }
      lambda *= 10.0;
    }
    if (!have_step) break;  // stuck; report the best point, converged = false

    // Opportunistically try smaller dampings from the same base point: on a
    // near-quadratic objective this walks to the Gauss-Newton step at the
    // cost of one extra residual evaluation.
    Eigen::VectorXd best_dp = dp;
    Eigen::VectorXd best_r = r_try;
    double best_chi2 = chi2_try;
    double best_lambda = lambda;
    double lam = lambda;
    for (int k = 0; k < 4; ++k) {
      lam *= 0.1;
      Eigen::VectorXd dp2;
      if (!try_step(lam, dp2)) break;
      const Eigen::VectorXd r2 = residuals(p + dp2);
      if (!r2.allFinite()) break;
      const double c2 = r2.squaredNorm();
      if (c2 >= best_chi2) break;
      best_dp = dp2;
      best_r = r2;
      best_chi2 = c2;
      best_lambda = lam;
    }

    const double rel_step = max_relative_step(best_dp, p);
    p += best_dp;
    r = best_r;
    chi2 = best_chi2;
    lambda = std::max(best_lambda, 1e-12);
    ++accepted;
    result.objective_history.push_back(chi2);

    jac = numerical_jacobian(residuals, p, options.jacobian_relative_step);
    grad = jac.transpose() * r;

    if (rel_step < options.step_tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged && grad.norm() <= grad_threshold) converged = true;

  const auto m = static_cast<double>(r.size());
  const auto n = static_cast<double>(p.size());
  const double dof = m > n ? m - n : 1.0;
  const Eigen::MatrixXd a = jac.transpose() * jac;
  Eigen::MatrixXd cov = psd_pseudo_inverse(a) * (chi2 / dof);
  cov = 0.5 * (cov + cov.transpose()).eval();

  result.estimates = p;
  result.covariance = cov;
  result.sigma.resize(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    result.sigma[i] = std::sqrt(std::max(cov(i, i), 0.0));
  result.residual_norm = std::sqrt(chi2);
  result.converged = converged;
  result.n_iterations = accepted;
  return result;
}

namespace {

// LM in scaled coordinates q = p / units. Parameters spread over many
// decades (m/s next to rates next to 1e-6 scales) make the normal matrix
// ill-conditioned enough that the solver stalls and the pseudo-inverse
// drops real curvature directions; fitting q ~ O(1) avoids both, and the
// covariance transforms back diagonally.
FitResult scaled_levenberg_marquardt(const ResidualFn& residuals,
                                     const Eigen::VectorXd& init,
                                     const Eigen::VectorXd& units,
                                     const LmOptions& options = {}) {
  const ResidualFn scaled = [&](const Eigen::VectorXd& q) {
    return residuals(q.cwiseProduct(units));
  };
  FitResult fr =
      levenberg_marquardt(scaled, init.cwiseQuotient(units), options);
  fr.estimates = fr.estimates.cwiseProduct(units).eval();
  for (Eigen::Index i = 0; i < units.size(); ++i) {
    fr.covariance.row(i) *= units[i];
    fr.covariance.col(i) *= units[i];
    fr.sigma[i] *= units[i];
  }
  return fr;
}

}  // namespace

// ---- Trace fit -----------------------------------------------------------

TraceFit fit_trace(const McsHistogram& hist, double window_start,
                   double window_end, const TrapConfig& trap,
                   const DetectionLaser& laser,
                   std::optional<double> amplitude_hint) {
  hist.validate();
  if (!(laser.saturation() > 0.0))
    throw std::invalid_argument("fit_trace: laser saturation must be > 0");
  if (std::abs(window_start) > 1e-12)
    throw std::invalid_argument(
        "fit_trace: window must start at detection onset");
  const double period = trap.period();
  if (window_end - window_start < 3.0 * period * (1.0 - 1e-9))
    throw WindowTooShort(
        "fit_trace: window shorter than 3 oscillation periods");
  const double total = hist.bin_width * static_cast<double>(hist.n_bins());
  if (window_end > total * (1.0 + 1e-9))
    throw std::invalid_argument("fit_trace: window extends past the histogram");

  const auto n_fit = std::min<Eigen::Index>(
      hist.n_bins(),
      static_cast<Eigen::Index>(std::floor(window_end / hist.bin_width + 1e-9)));
  const Eigen::ArrayXd y = hist.net().head(n_fit);
  Eigen::ArrayXd wts(n_fit);  // 1/sigma_bin, Poisson on raw counts
  for (Eigen::Index i = 0; i < n_fit; ++i)
    wts[i] =
        1.0 / std::sqrt(static_cast<double>(std::max<std::int64_t>(
                  hist.counts[i], 1)));

  const double omega = trap.omega_a();
  const double bw = hist.bin_width;

  const ResidualFn residual_fn = [&](const Eigen::VectorXd& q) {
    const Eigen::ArrayXd rate = detail::binned_oscillating_rate(
        q[0], q[1], omega, laser, 0.0, bw, n_fit, 8);
    return Eigen::VectorXd(((q[2] * rate + q[3] - y) * wts).matrix());
  };

  // (scale, background) enter linearly; solve them exactly for each
  // (v, phi) start.
  const auto linear_init = [&](double v, double phi, double& scale,
                               double& bg) {
    const Eigen::ArrayXd rate = detail::binned_oscillating_rate(
        v, phi, omega, laser, 0.0, bw, n_fit, 8);
    const Eigen::ArrayXd w2 = wts * wts;
    const double sww = w2.sum();
    const double swr = (w2 * rate).sum();
    const double swrr = (w2 * rate * rate).sum();
    const double swy = (w2 * y).sum();
    const double swry = (w2 * rate * y).sum();
    const double det = swrr * sww - swr * swr;
    scale = 0.0;
    bg = 0.0;
    if (std::abs(det) > 1e-300) {
      scale = (swry * sww - swy * swr) / det;
      bg = (swrr * swy - swr * swry) / det;
    }
    if (!std::isfinite(scale) || scale <= 0.0) {
      scale = std::max(y.maxCoeff(), 1.0) / std::max(rate.maxCoeff(), 1e-300);
      bg = 0.0;
    }
    if (!std::isfinite(bg)) bg = 0.0;
  };

  const double v_sat = std::abs(laser.detuning()) / laser.wavenumber();
  std::vector<double> v_starts;
  if (amplitude_hint && *amplitude_hint > 0.0)
    v_starts.push_back(*amplitude_hint * omega);
  v_starts.push_back(1.3 * v_sat);
  v_starts.push_back(0.3 * v_sat);

  FitResult best;
  double best_chi2 = std::numeric_limits<double>::infinity();
  bool have = false;
  for (const double v0 : v_starts) {
    for (int k = 0; k < 8; ++k) {
      const double phi0 = static_cast<double>(k) * (kTwoPi / 8.0);
      double s0 = 0.0;
      double b0 = 0.0;
      linear_init(v0, phi0, s0, b0);
      Eigen::VectorXd q0(4);
      q0 << v0, phi0, s0, b0;
      Eigen::VectorXd units(4);
      units << v_sat, 1.0, std::max(std::abs(s0), 1e-300),
          std::max(std::abs(b0), 1.0);
      FitResult fr;
      try {
        fr = scaled_levenberg_marquardt(residual_fn, q0, units);
      } catch (const SingularNormalMatrix&) {
        continue;
      }
      const double c = fr.residual_norm * fr.residual_norm;
      const bool better =
          !have || (fr.converged && !best.converged) ||
          (fr.converged == best.converged && c < best_chi2);
      if (better) {
        best = std::move(fr);
        best_chi2 = c;
        have = true;
      }
    }
  }
  if (!have)
    throw SingularNormalMatrix("fit_trace: every start was degenerate");

  // Normalize: v >= 0 with the sign folded into the phase, phi in [0, 2pi).
  Eigen::VectorXd q = best.estimates;
  if (q[0] < 0.0) {
    q[0] = -q[0];
    q[1] += kPi;
    best.covariance.row(0) *= -1.0;
    best.covariance.col(0) *= -1.0;
  }
  q[1] = std::fmod(q[1], kTwoPi);
  if (q[1] < 0.0) q[1] += kTwoPi;
  if (q[1] >= kTwoPi) q[1] = 0.0;
  best.estimates = q;

  const double sigma_v = best.sigma[0];
  const double amplitude = q[0] / omega;
  const double amplitude_sigma = sigma_v / omega;

  // The model object prefers raw-trace conventions: its background is the
  // subtracted level plus the fitted offset, floored at zero.
  const double model_scale =
      q[2] > 0.0 ? q[2] : std::numeric_limits<double>::min();
  const double model_bg = std::max(q[3] + hist.background_rate, 0.0);
  OscillationModel model(q[0], q[1], omega, laser, model_scale, model_bg);

  return TraceFit{std::move(best), std::move(model), amplitude,
                  amplitude_sigma};
}

// ---- Pulse-duration sweep fit --------------------------------------------

SweepFit fit_pulse_sweep(const std::vector<SweepPoint>& points,
                         bool fit_period) {
  if (points.size() < 5)
    throw std::invalid_argument("fit_pulse_sweep: need at least 5 points");
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -rmin;
  bool any_noninteger = false;
  double amp_max = 0.0;
  for (const auto& pt : points) {
    if (!(std::isfinite(pt.tau_over_period) && pt.tau_over_period >= 0.0))
      throw std::invalid_argument(
          "fit_pulse_sweep: tau_over_period must be >= 0");
    if (!(std::isfinite(pt.sigma) && pt.sigma > 0.0))
      throw std::invalid_argument("fit_pulse_sweep: sigma must be > 0");
    rmin = std::min(rmin, pt.tau_over_period);
    rmax = std::max(rmax, pt.tau_over_period);
    amp_max = std::max(amp_max, std::abs(pt.amplitude));
    if (std::abs(pt.tau_over_period - std::round(pt.tau_over_period)) > 1e-9)
      any_noninteger = true;
  }
  if (!any_noninteger)
    throw DegenerateSweep(
        "fit_pulse_sweep: every point sits at an integer tau/T, where the "
        "model vanishes");
  if (rmax - rmin < 0.5 * (1.0 - 1e-12))
    throw std::invalid_argument(
        "fit_pulse_sweep: points must span at least half a period");

  // x_a(r) = x_d sqrt(2 (1 - cos(2 pi r / c))) = 2 x_d |sin(pi r / c)|,
  // evaluated in the sine form (stable near integer r).
  const ResidualFn fn = [&](const Eigen::VectorXd& q) {
    const double xd = q[0];
    const double c = fit_period ? q[1] : 1.0;
    Eigen::VectorXd res(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double model =
          2.0 * xd * std::abs(std::sin(kPi * points[i].tau_over_period / c));
      res[static_cast<Eigen::Index>(i)] =
          (model - points[i].amplitude) / points[i].sigma;
    }
    return res;
  };

  Eigen::VectorXd q0(fit_period ? 2 : 1);
  q0[0] = 0.5 * amp_max;  // model maximum is 2 x_d
  if (fit_period) q0[1] = 1.0;
  Eigen::VectorXd units(q0.size());
  units[0] = std::max(0.5 * amp_max, 1e-12);
  if (fit_period) units[1] = 1.0;

  FitResult fr = scaled_levenberg_marquardt(fn, q0, units);

  if (fr.estimates[0] < 0.0) {
    fr.estimates[0] = -fr.estimates[0];
    fr.covariance.row(0) *= -1.0;
    fr.covariance.col(0) *= -1.0;
  }
  const double xd = fr.estimates[0];
  const double xd_sigma = fr.sigma[0];
  const double pscale = fit_period ? fr.estimates[1] : 1.0;
  const double pscale_sigma = fit_period ? fr.sigma[1] : 0.0;
  return SweepFit{std::move(fr), xd, xd_sigma, pscale, pscale_sigma};
}

// ---- sqrt voltage calibration --------------------------------------------

VoltageFit fit_sqrt_voltage(const std::vector<VoltagePoint>& points,
                            bool fit_offset) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_sqrt_voltage: need at least 3 points");
  double v_max = -std::numeric_limits<double>::infinity();
  double x_at_vmax = 0.0;
  for (const auto& pt : points) {
    if (!(std::isfinite(pt.sigma) && pt.sigma > 0.0))
      throw std::invalid_argument("fit_sqrt_voltage: sigma must be > 0");
    if (!std::isfinite(pt.voltage) || !std::isfinite(pt.displacement))
      throw std::invalid_argument("fit_sqrt_voltage: non-finite point");
    if (pt.voltage > v_max) {
      v_max = pt.voltage;
      x_at_vmax = pt.displacement;
    }
  }

  // sqrt argument clamped at 0 during iteration.
  const ResidualFn fn = [&](const Eigen::VectorXd& q) {
    const double a = q[0];
    const double v0 = fit_offset ? q[1] : 0.0;
    Eigen::VectorXd res(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double model =
          a * std::sqrt(std::max(points[i].voltage - v0, 0.0));
      res[static_cast<Eigen::Index>(i)] =
          (model - points[i].displacement) / points[i].sigma;
    }
    return res;
  };

  Eigen::VectorXd q0(fit_offset ? 2 : 1);
  q0[0] = v_max > 0.0 ? x_at_vmax / std::sqrt(v_max) : 1.0;
  if (!std::isfinite(q0[0]) || q0[0] == 0.0) q0[0] = 1.0;
  if (fit_offset) q0[1] = 0.0;
  Eigen::VectorXd units(q0.size());
  units[0] = std::abs(q0[0]);
  if (fit_offset) units[1] = std::max(std::abs(v_max), 1.0);

  FitResult fr = scaled_levenberg_marquardt(fn, q0, units);

  const double v0 = fit_offset ? fr.estimates[1] : 0.0;
  for (const auto& pt : points)
    if (pt.voltage <= v0)
      throw DomainViolation(
          "fit_sqrt_voltage: data point at or below the fitted offset");

  const double a = fr.estimates[0];
  const double a_sigma = fr.sigma[0];
  const double v0_sigma = fit_offset ? fr.sigma[1] : 0.0;
  return VoltageFit{std::move(fr), a, a_sigma, v0, v0_sigma};
}

}  // namespace ionlab
