#pragma once

#include "anchor/linalg.hpp"

#include <string>

namespace anchor {

enum class ScheduleFamily { PowerLaw, StronglyMonotone, Adaptive, None };

// Anchor coefficient family: beta(t) for the continuous flow and the matching
// contraction function C(t) = exp(int beta).
class AnchorSchedule {
 public:
  static constexpr double kDefaultClampDelta = 1e-3;

  /// beta(t) = gamma / t^p.
  static AnchorSchedule power_law(double gamma, double p, double clamp_delta = kDefaultClampDelta);
  /// beta(t) = 2 mu / (e^{2 mu t} - 1).
  static AnchorSchedule strongly_monotone(double mu, double clamp_delta = kDefaultClampDelta);
  static AnchorSchedule adaptive(double clamp_delta = kDefaultClampDelta);
  static AnchorSchedule none(double clamp_delta = kDefaultClampDelta);

  ScheduleFamily family() const { return family_; }
  double gamma() const { return gamma_; }
  double p() const { return p_; }
  double mu() const { return mu_; }
  double clamp_delta() const { return clamp_delta_; }
  /// True for p == 1 within 1e-12, where C(t) = t^gamma.
  bool is_harmonic() const;

  std::string name() const;

 private:
  AnchorSchedule() = default;

  ScheduleFamily family_ = ScheduleFamily::None;
  double gamma_ = 0.0;
  double p_ = 0.0;
  double mu_ = 0.0;
  double clamp_delta_ = kDefaultClampDelta;
};

/// Anchor coefficient at t > 0. Throws AdaptiveNeedsState for the adaptive family.
double beta_at(const AnchorSchedule& s, double t);

/// beta(max(t, delta)): finite for every t >= 0.
double beta_clamped(const AnchorSchedule& s, double t);

/// Time derivative of beta, used by the Lyapunov diagnostics.
double beta_dot(const AnchorSchedule& s, double t);

/// C(t) in closed form: t^gamma (p = 1), exp(gamma t^{1-p} / (1-p)) (p != 1),
/// 1 - e^{-2 mu t} (strongly monotone).
double contraction_C(const AnchorSchedule& s, double t);

/// C(a) / C(b) evaluated without forming either factor, so it stays finite
/// where C itself overflows. a may be 0.
double contraction_ratio(const AnchorSchedule& s, double a, double b);

/// Discrete adaptive anchor coefficient
///   beta = |r|^2 / (-<r, x - x0> + |r|^2),   0 when |r|^2 <= eps.
/// Throws NonpositiveDenominator when <r, x - x0> >= 0 for a nonzero residual,
/// the only situation in which the ratio would leave [0, 1).
double beta_adaptive_discrete(const Vector& residual, const Vector& x, const Vector& x0, double eps = 1e-24);

/// Same rule from precomputed products |r|^2 and <r, x - x0>, for callers
/// working in a non-Euclidean inner product.
double beta_adaptive_from_products(double residual_sq, double inner, double eps = 1e-24);

}  // namespace anchor
