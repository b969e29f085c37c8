#pragma once

#include "anchor/dynamics.hpp"
#include "anchor/linalg.hpp"
#include "anchor/operators.hpp"
#include "anchor/schedules.hpp"
#include "anchor/solvers.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anchor {

/// Squared residual at or below this level is treated as an exact zero.
inline constexpr double kNumericalZeroSq = 1e-24;

// Least-squares line through (log k, log |residual|^2).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t samples = 0;
  /// Samples inside the window that were numerically zero and left out.
  std::size_t zero_samples = 0;
  /// Every residual in the window vanished: slope is -inf, nothing was fitted.
  bool exact_convergence = false;
};

/// Fits over abscissae in [lo, hi]. Needs at least 10 positive samples in the
/// window unless every sample there is zero, which returns the -inf sentinel.
RateFit fit_rate(std::span<const double> abscissa, std::span<const double> resid_sq, double lo, double hi);
RateFit fit_rate(const IterateLog& log, double k_min, double k_max);
RateFit fit_rate(const Trajectory& traj, double t_min, double t_max);
/// Default window: the last two decades of the recorded range.
RateFit fit_rate(const IterateLog& log);

// Worst-case log-log slope of |r_k|^2 for the generalized anchored method
// with weights gamma/(k^p + gamma): -2 for p = 1 and gamma >= 1, -2 gamma for
// p = 1 and gamma < 1, -2p for p < 1, and no decay for p > 1.
struct RateExpectation {
  bool flat = false;
  double slope = 0.0;
};

RateExpectation expected_generalized_slope(double gamma, double p);

/// Flat expectations accept slopes in (-0.2, 0.2]; otherwise |slope - expected| <= tol.
bool slope_matches(const RateExpectation& expected, double slope, double tol = 0.15);

/// V(t) = t^2 |r|^2 + 2 t <r, x - x0>  (beta = 1/t).
double lyapunov_appm(const Vector& x, const Vector& resid, double t, const Vector& x0);

/// V(t) for beta(t) = 2 mu / (e^{2 mu t} - 1).
double lyapunov_strong(const Vector& x, const Vector& resid, double t, const Vector& x0, double mu);

/// |r(t)|^2 <= 4 (mu / (e^{mu t} - 1))^2 |X0 - x*|^2 (1 + 1e-3) at every sample with t > 0.
bool check_residual_bound_strong(const Trajectory& traj, double mu, const Vector& x_star);

struct MonotoneBoundReport {
  bool exact = false;  ///< true for gamma = p = 1, where the closed bound is checked
  bool holds = true;   ///< exact case: every sample satisfied the bound
  std::size_t violations = 0;
  /// Non-exact case: |r|^2 min(C(t)^2, 1/beta(t)^2) per sample.
  std::vector<double> ratios;
  double max_ratio = 0.0;
};

/// Residual bound for a power-law schedule. For gamma = p = 1 checks
/// |r|^2 <= 4/t^2 |X0 - x*|^2 (1 + 1e-3) for samples with t >= t_min;
/// otherwise reports the boundedness diagnostic. Throws
/// UnsupportedScheduleForExactBound for non power-law schedules.
MonotoneBoundReport check_residual_bound_monotone(const Trajectory& traj, const AnchorSchedule& s,
                                                  const Vector& x_star, double t_min = 0.0);
/// Discrete version, with the iteration count k standing in for t.
MonotoneBoundReport check_residual_bound_monotone(const IterateLog& log, const AnchorSchedule& s,
                                                  const Vector& x_star, double k_min = 1.0);

struct AppmBoundReport {
  bool holds = true;
  std::size_t violations = 0;
  /// max_k  k h |r_k| / |x0 - x*|
  double max_ratio = 0.0;
};

/// Checks |r_k| <= |x0 - x*| / (h k) (1 + slack) for every logged iterate.
AppmBoundReport check_appm_bound(const IterateLog& log, const Vector& x_star, double slack = 1e-10);

// Invariants of the adaptive method, evaluated on the scaled residual
// h r_k = y^{k-1} - x^k. Pairs (k, k+1) are only checked when both entries
// were logged.
struct AdaptiveReport {
  bool beta_first_half = true;  ///< beta_1 = 1/2 whenever the first residual is nonzero
  bool beta_in_range = true;    ///< 0 <= beta_k < 1
  bool beta_harmonic = true;    ///< beta_k <= 1/(k+1)
  bool phi_nonpositive = true;  ///< |r_{k+1}|^2 + beta_k <r_{k+1}, x^{k+1} - x0> <= 1e-10
  bool residual_bound = true;   ///< |r_{k+1}|^2 <= 4 beta_k^2 |x0 - x*|^2 (1 + 1e-8)
  double max_phi = -std::numeric_limits<double>::infinity();
  std::size_t violations = 0;

  bool all() const { return beta_first_half && beta_in_range && beta_harmonic && phi_nonpositive && residual_bound; }
};

AdaptiveReport check_adaptive_invariants(const IterateLog& log, const Vector& x_star);

enum class TightnessWeight { Quadratic, TwoGamma, TwoP, One };

struct TightnessEstimate {
  std::vector<double> times;
  std::vector<double> weighted;  ///< r(t) |M X(t)|^2 on the grid
  double last_decade_max = 0.0;
};

/// Evaluates r(t) |M X(t)|^2 along the closed-form solution on t_grid.
TightnessEstimate worstcase_nonvanishing(const Matrix& m, const AnchorSchedule& s, const Vector& x0,
                                         TightnessWeight weight, std::span<const double> t_grid);

struct LimitCheckRow {
  double h = 0.0;
  std::size_t iterations = 0;
  double max_deviation = 0.0;
};

/// Max over 0 <= k <= T/(2h) of |x^k - X(2kh)| for APPM(h) against the
/// beta = 1/t flow. Requires a linear operator (closed-form X).
std::vector<LimitCheckRow> continuous_limit_check(const Operator& op, const Vector& x0, double horizon,
                                                  std::span<const double> h_list);

/// True when max deviations strictly decrease (or are all zero).
bool deviations_shrink(const std::vector<LimitCheckRow>& rows);

}  // namespace anchor
