#include "anchor/schedules.hpp"

#include "anchor/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace anchor {

namespace {

void check_delta(double delta) { require(delta > 0.0 && delta < 1.0, "clamp_delta must lie in (0, 1)"); }

void require_closed_form(const AnchorSchedule& s, const char* what) {
  if (s.family() == ScheduleFamily::Adaptive) {
    fail(ErrorCode::AdaptiveNeedsState, std::string(what) + " of the adaptive schedule depends on the state");
  }
}

}  // namespace

AnchorSchedule AnchorSchedule::power_law(double gamma, double p, double clamp_delta) {
  require(gamma > 0.0 && std::isfinite(gamma), "power-law schedule needs gamma > 0");
  require(p > 0.0 && std::isfinite(p), "power-law schedule needs p > 0");
  check_delta(clamp_delta);
  AnchorSchedule s;
  s.family_ = ScheduleFamily::PowerLaw;
  s.gamma_ = gamma;
  s.p_ = p;
  s.clamp_delta_ = clamp_delta;
  return s;
}

AnchorSchedule AnchorSchedule::strongly_monotone(double mu, double clamp_delta) {
  require(mu > 0.0 && std::isfinite(mu), "strongly monotone schedule needs mu > 0");
  check_delta(clamp_delta);
  AnchorSchedule s;
  s.family_ = ScheduleFamily::StronglyMonotone;
  s.mu_ = mu;
  s.clamp_delta_ = clamp_delta;
  return s;
}

AnchorSchedule AnchorSchedule::adaptive(double clamp_delta) {
  check_delta(clamp_delta);
  AnchorSchedule s;
  s.family_ = ScheduleFamily::Adaptive;
  s.clamp_delta_ = clamp_delta;
  return s;
}

AnchorSchedule AnchorSchedule::none(double clamp_delta) {
  check_delta(clamp_delta);
  AnchorSchedule s;
  s.family_ = ScheduleFamily::None;
  s.clamp_delta_ = clamp_delta;
  return s;
}

bool AnchorSchedule::is_harmonic() const { return std::abs(p_ - 1.0) < 1e-12; }

std::string AnchorSchedule::name() const {
  std::ostringstream out;
  switch (family_) {
    case ScheduleFamily::PowerLaw: out << "power_law(gamma=" << gamma_ << ",p=" << p_ << ")"; break;
    case ScheduleFamily::StronglyMonotone: out << "strongly_monotone(mu=" << mu_ << ")"; break;
    case ScheduleFamily::Adaptive: out << "adaptive"; break;
    case ScheduleFamily::None: out << "none"; break;
  }
  return out.str();
}

double beta_at(const AnchorSchedule& s, double t) {
  require_closed_form(s, "beta");
  require(t > 0.0, "beta is defined for t > 0");
  switch (s.family()) {
    case ScheduleFamily::PowerLaw: return s.gamma() / std::pow(t, s.p());
    case ScheduleFamily::StronglyMonotone: return 2.0 * s.mu() / std::expm1(2.0 * s.mu() * t);
    case ScheduleFamily::None: return 0.0;
    case ScheduleFamily::Adaptive: break;
  }
  return 0.0;
}

double beta_clamped(const AnchorSchedule& s, double t) { return beta_at(s, std::max(t, s.clamp_delta())); }

double beta_dot(const AnchorSchedule& s, double t) {
  require_closed_form(s, "beta'");
  require(t > 0.0, "beta' is defined for t > 0");
  switch (s.family()) {
    case ScheduleFamily::PowerLaw: return -s.p() * s.gamma() / std::pow(t, s.p() + 1.0);
    case ScheduleFamily::StronglyMonotone: {
      const double e = std::expm1(2.0 * s.mu() * t);
      return -4.0 * s.mu() * s.mu() * (e + 1.0) / (e * e);
    }
    case ScheduleFamily::None: return 0.0;
    case ScheduleFamily::Adaptive: break;
  }
  return 0.0;
}

double contraction_C(const AnchorSchedule& s, double t) {
  require_closed_form(s, "C(t)");
  require(s.family() != ScheduleFamily::None, "C(t) is constant for the empty schedule");
  require(t > 0.0, "C(t) is evaluated for t > 0");
  if (s.family() == ScheduleFamily::StronglyMonotone) return -std::expm1(-2.0 * s.mu() * t);
  if (s.is_harmonic()) return std::pow(t, s.gamma());
  return std::exp(s.gamma() / (1.0 - s.p()) * std::pow(t, 1.0 - s.p()));
}

double contraction_ratio(const AnchorSchedule& s, double a, double b) {
  require_closed_form(s, "C(t)");
  require(s.family() != ScheduleFamily::None, "C(t) is constant for the empty schedule");
  require(a >= 0.0 && b > 0.0, "contraction ratio needs a >= 0 and b > 0");
  if (s.family() == ScheduleFamily::StronglyMonotone) {
    return std::expm1(-2.0 * s.mu() * a) / std::expm1(-2.0 * s.mu() * b);
  }
  if (s.is_harmonic()) return std::pow(a / b, s.gamma());
  if (a == 0.0) {
    // C(0) = 1 for p < 1 and 0 for p > 1.
    if (s.p() > 1.0) return 0.0;
    return std::exp(-s.gamma() / (1.0 - s.p()) * std::pow(b, 1.0 - s.p()));
  }
  const double k = s.gamma() / (1.0 - s.p());
  return std::exp(k * (std::pow(a, 1.0 - s.p()) - std::pow(b, 1.0 - s.p())));
}

double beta_adaptive_discrete(const Vector& residual, const Vector& x, const Vector& x0, double eps) {
  require_same_dim(residual, x, "beta_adaptive_discrete");
  require_same_dim(x, x0, "beta_adaptive_discrete");
  return beta_adaptive_from_products(residual.squaredNorm(), residual.dot(x - x0), eps);
}

double beta_adaptive_from_products(double rr, double inner, double eps) {
  require(eps >= 0.0, "zero-residual tolerance must be nonnegative");
  if (rr <= eps) return 0.0;
  if (!(inner < 0.0)) {
    std::ostringstream msg;
    msg << "<r, x - x0> = " << inner << " is not negative while |r|^2 = " << rr;
    fail(ErrorCode::NonpositiveDenominator, msg.str());
  }
  return rr / (-inner + rr);
}

}  // namespace anchor
