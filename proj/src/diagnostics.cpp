#include "anchor/diagnostics.hpp"

#include "anchor/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anchor {

RateFit fit_rate(std::span<const double> abscissa, std::span<const double> resid_sq, double lo, double hi) {
  if (abscissa.size() != resid_sq.size()) fail(ErrorCode::DimensionMismatch, "fit_rate: series lengths differ");
  require(lo > 0.0 && hi > lo, "fit window must satisfy 0 < lo < hi");

  RateFit fit;
  fit.window_lo = lo;
  fit.window_hi = hi;
  // Accumulate the normal equations in long double; exact power laws must
  // recover their exponent to ~1e-12.
  long double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t in_window = 0;
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    const double k = abscissa[i];
    if (k < lo || k > hi) continue;
    ++in_window;
    if (!(resid_sq[i] > kNumericalZeroSq)) {
      ++fit.zero_samples;
      continue;
    }
    const long double x = std::log(static_cast<long double>(k));
    const long double y = std::log(static_cast<long double>(resid_sq[i]));
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  if (in_window > 0 && fit.zero_samples == in_window) {
    fit.exact_convergence = true;
    fit.slope = -std::numeric_limits<double>::infinity();
    fit.intercept = std::numeric_limits<double>::quiet_NaN();
    fit.r_squared = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  fit.samples = static_cast<std::size_t>(n);
  require(fit.samples >= 10, "fit window holds fewer than 10 positive samples");

  const long double cxx = sxx - sx * sx / n;
  const long double cxy = sxy - sx * sy / n;
  const long double cyy = syy - sy * sy / n;
  require(cxx > 0, "fit window needs at least two distinct abscissae");
  const long double slope = cxy / cxx;
  fit.slope = static_cast<double>(slope);
  fit.intercept = static_cast<double>((sy - slope * sx) / n);
  if (cyy <= 0) {
    fit.r_squared = 1.0;
  } else {
    fit.r_squared = static_cast<double>(std::clamp<long double>(cxy * cxy / (cxx * cyy), 0.0L, 1.0L));
  }
  return fit;
}

RateFit fit_rate(const IterateLog& log, double k_min, double k_max) {
  std::vector<double> ks(log.ks.begin(), log.ks.end());
  const auto rs = log.residual_sq();
  return fit_rate(ks, rs, k_min, k_max);
}

RateFit fit_rate(const Trajectory& traj, double t_min, double t_max) {
  std::vector<double> rs;
  rs.reserve(traj.size());
  for (const auto& r : traj.residuals()) rs.push_back(r.squaredNorm());
  return fit_rate(traj.times(), rs, t_min, t_max);
}

RateFit fit_rate(const IterateLog& log) {
  require(log.size() >= 1, "empty iterate log");
  const double k_max = static_cast<double>(log.ks.back());
  return fit_rate(log, std::max(1.0, k_max / 100.0), k_max);
}

RateExpectation expected_generalized_slope(double gamma, double p) {
  require(gamma > 0.0 && p > 0.0, "rate expectation needs gamma > 0 and p > 0");
  if (std::abs(p - 1.0) < 1e-12) return {false, -2.0 * std::min(gamma, 1.0)};
  if (p < 1.0) return {false, -2.0 * p};
  return {true, 0.0};
}

bool slope_matches(const RateExpectation& expected, double slope, double tol) {
  if (expected.flat) return slope > -0.2 && slope <= 0.2;
  return std::abs(slope - expected.slope) <= tol;
}

double lyapunov_appm(const Vector& x, const Vector& resid, double t, const Vector& x0) {
  require(t >= 0.0, "Lyapunov function needs t >= 0");
  return t * t * resid.squaredNorm() + 2.0 * t * resid.dot(x - x0);
}

double lyapunov_strong(const Vector& x, const Vector& resid, double t, const Vector& x0, double mu) {
  require(t >= 0.0 && mu > 0.0, "Lyapunov function needs t >= 0 and mu > 0");
  const double sinh2 = 2.0 * std::sinh(mu * t);  // e^{mu t} - e^{-mu t}
  const double one_minus = -std::expm1(-2.0 * mu * t);
  const Vector d = x - x0;
  return 0.5 * sinh2 * sinh2 * resid.squaredNorm() + 2.0 * mu * one_minus * resid.dot(d) -
         2.0 * mu * mu * one_minus * d.squaredNorm();
}

bool check_residual_bound_strong(const Trajectory& traj, double mu, const Vector& x_star) {
  require(mu > 0.0, "strong bound needs mu > 0");
  const double dist_sq = (traj.initial_state() - x_star).squaredNorm();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times()[i];
    if (t <= 0.0) continue;
    const double coeff = mu / std::expm1(mu * t);
    const double bound = 4.0 * coeff * coeff * dist_sq * (1.0 + 1e-3);
    if (traj.residuals()[i].squaredNorm() > bound) return false;
  }
  return true;
}

namespace {

MonotoneBoundReport monotone_bound(std::span<const double> times, const std::vector<double>& resid_sq,
                                   const AnchorSchedule& s, double dist_sq, double t_min) {
  if (s.family() != ScheduleFamily::PowerLaw) {
    fail(ErrorCode::UnsupportedScheduleForExactBound, "residual bound needs a power-law schedule, got " + s.name());
  }
  MonotoneBoundReport report;
  report.exact = s.is_harmonic() && std::abs(s.gamma() - 1.0) < 1e-12;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (t <= 0.0 || t < t_min) continue;
    if (report.exact) {
      const double bound = 4.0 / (t * t) * dist_sq * (1.0 + 1e-3);
      if (resid_sq[i] > bound) {
        report.holds = false;
        ++report.violations;
      }
    } else {
      const double c = contraction_C(s, t);
      const double inv_beta = 1.0 / beta_at(s, t);
      const double ratio = resid_sq[i] * std::min(c * c, inv_beta * inv_beta);
      report.ratios.push_back(ratio);
      report.max_ratio = std::max(report.max_ratio, ratio);
    }
  }
  return report;
}

}  // namespace

MonotoneBoundReport check_residual_bound_monotone(const Trajectory& traj, const AnchorSchedule& s,
                                                  const Vector& x_star, double t_min) {
  std::vector<double> rs;
  rs.reserve(traj.size());
  for (const auto& r : traj.residuals()) rs.push_back(r.squaredNorm());
  return monotone_bound(traj.times(), rs, s, (traj.initial_state() - x_star).squaredNorm(), t_min);
}

MonotoneBoundReport check_residual_bound_monotone(const IterateLog& log, const AnchorSchedule& s,
                                                  const Vector& x_star, double k_min) {
  std::vector<double> ks(log.ks.begin(), log.ks.end());
  return monotone_bound(ks, log.residual_sq(), s, (log.x0 - x_star).squaredNorm(), k_min);
}

AppmBoundReport check_appm_bound(const IterateLog& log, const Vector& x_star, double slack) {
  require_same_dim(log.x0, x_star, "APPM bound");
  AppmBoundReport out;
  const double dist = (log.x0 - x_star).norm();
  for (std::size_t j = 0; j < log.size(); ++j) {
    const double scaled = log.h * static_cast<double>(log.ks[j]) * log.residuals[j].norm();
    if (dist > 0.0) out.max_ratio = std::max(out.max_ratio, scaled / dist);
    if (scaled > dist * (1.0 + slack)) {
      out.holds = false;
      ++out.violations;
    }
  }
  return out;
}

AdaptiveReport check_adaptive_invariants(const IterateLog& log, const Vector& x_star) {
  require_same_dim(log.x0, x_star, "adaptive invariants");
  AdaptiveReport out;
  const double dist_sq = (log.x0 - x_star).squaredNorm();
  auto flag = [&out](bool& field) {
    field = false;
    ++out.violations;
  };
  for (std::size_t j = 0; j < log.size(); ++j) {
    const int k = log.ks[j];
    const double b = log.betas[j];
    const Vector r = log.h * log.residuals[j];
    if (k == 1 && r.squaredNorm() > kNumericalZeroSq && std::abs(b - 0.5) > 1e-12) flag(out.beta_first_half);
    if (!(b >= 0.0 && b < 1.0)) flag(out.beta_in_range);
    if (b > (1.0 + 1e-10) / (k + 1.0)) flag(out.beta_harmonic);
    if (j + 1 < log.size() && log.ks[j + 1] == k + 1) {
      const Vector r_next = log.h * log.residuals[j + 1];
      const double r_next_sq = r_next.squaredNorm();
      const double phi = r_next_sq + b * r_next.dot(log.xs[j + 1] - log.x0);
      out.max_phi = std::max(out.max_phi, phi);
      if (phi > 1e-10) flag(out.phi_nonpositive);
      if (r_next_sq > kNumericalZeroSq && r_next_sq > 4.0 * b * b * dist_sq * (1.0 + 1e-8)) flag(out.residual_bound);
    }
  }
  return out;
}

TightnessEstimate worstcase_nonvanishing(const Matrix& m, const AnchorSchedule& s, const Vector& x0,
                                         TightnessWeight weight, std::span<const double> t_grid) {
  require(!t_grid.empty(), "tightness check needs a time grid");
  TightnessEstimate out;
  const double t_last = *std::max_element(t_grid.begin(), t_grid.end());
  for (const double t : t_grid) {
    require(t > 0.0, "tightness grid must be positive");
    const int nodes = std::max(512, static_cast<int>(std::ceil(64.0 * t * std::max(1.0, spectral_norm(m)))));
    const Vector x = integral_solution_linear(m, s, x0, t, nodes);
    const double value = (m * x).squaredNorm();
    double r = 1.0;
    switch (weight) {
      case TightnessWeight::Quadratic: r = t * t; break;
      case TightnessWeight::TwoGamma: r = std::pow(t, 2.0 * s.gamma()); break;
      case TightnessWeight::TwoP: r = std::pow(t, 2.0 * s.p()); break;
      case TightnessWeight::One: r = 1.0; break;
    }
    out.times.push_back(t);
    out.weighted.push_back(r * value);
    if (t >= t_last / 10.0) out.last_decade_max = std::max(out.last_decade_max, r * value);
  }
  return out;
}

namespace {

Vector anchor_flow_harmonic(const Matrix& m, const Vector& x0, double t) {
  if (t == 0.0) return x0;
  try {
    return series_solution_linear(m, 1.0, x0, t, 1e-15);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoConvergence) throw;
    return integral_solution_linear(m, AnchorSchedule::power_law(1.0, 1.0), x0, t,
                                    std::max(512, static_cast<int>(64.0 * t * spectral_norm(m))));
  }
}

}  // namespace

std::vector<LimitCheckRow> continuous_limit_check(const Operator& op, const Vector& x0, double horizon,
                                                  std::span<const double> h_list) {
  require(op.is_linear(), "continuous-limit check needs a linear operator");
  require(op.offset().norm() == 0.0, "continuous-limit check needs A(0) = 0");
  require(horizon > 0.0, "horizon must be positive");
  std::vector<LimitCheckRow> rows;
  for (const double h : h_list) {
    require(h > 0.0, "step sizes must be positive");
    const int iters = static_cast<int>(std::floor(horizon / (2.0 * h) + 1e-9));
    require(iters >= 1, "horizon too short for step " + std::to_string(h));
    SolverConfig cfg;
    cfg.h = h;
    cfg.max_iter = iters;
    const IterateLog log = run_appm(op, x0, cfg);
    LimitCheckRow row;
    row.h = h;
    row.iterations = static_cast<std::size_t>(iters);
    for (std::size_t j = 0; j < log.size(); ++j) {
      const double t = 2.0 * log.ks[j] * h;
      row.max_deviation = std::max(row.max_deviation, (log.xs[j] - anchor_flow_harmonic(op.matrix(), x0, t)).norm());
    }
    rows.push_back(row);
  }
  return rows;
}

bool deviations_shrink(const std::vector<LimitCheckRow>& rows) {
  bool all_zero = true;
  for (const auto& r : rows) all_zero = all_zero && r.max_deviation == 0.0;
  if (all_zero) return true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].max_deviation < rows[i - 1].max_deviation)) return false;
  }
  return true;
}

}  // namespace anchor
