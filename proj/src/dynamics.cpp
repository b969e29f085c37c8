#include "anchor/dynamics.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace anchor {

namespace {

constexpr double kZeroResidualSq = 1e-24;
constexpr double kAdaptiveSingularWindow = 1e-6;
// Largest beta * step used inside one RK4 stage. The clamped schedule is
// stiff near t = 0 (beta(delta) = gamma / delta^p), so grid steps there are
// split into substeps; beta is nonincreasing, so its value at the left end
// bounds the whole step.
constexpr double kMaxAnchorStiffness = 0.25;
constexpr int kMaxSubsteps = 1 << 20;

using Drift = std::function<Vector(double, const Vector&)>;

Vector rk4_step(const Drift& f, double t, const Vector& x, double h) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Samples {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> residuals;
  std::vector<double> betas;

  void push(double t, const Vector& x, Vector r, double b) {
    times.push_back(t);
    states.push_back(x);
    residuals.push_back(std::move(r));
    betas.push_back(b);
  }

  Trajectory finish(const std::string& meta) && {
    return Trajectory(std::move(times), std::move(states), std::move(residuals), std::move(betas), meta);
  }
};

void check_grid(double t_max, int n_steps, int record_every) {
  require(t_max > 0.0 && std::isfinite(t_max), "t_max must be positive");
  require(n_steps >= 10, "n_steps must be at least 10");
  require(record_every >= 1, "record_every must be positive");
}

}  // namespace

Trajectory::Trajectory(std::vector<double> times, std::vector<Vector> states, std::vector<Vector> residuals,
                       std::vector<double> betas, std::string meta)
    : times_(std::move(times)),
      states_(std::move(states)),
      residuals_(std::move(residuals)),
      betas_(std::move(betas)),
      meta_(std::move(meta)) {
  const std::size_t n = times_.size();
  require(n >= 1, "trajectory needs at least one sample");
  require(states_.size() == n && residuals_.size() == n && betas_.size() == n,
          "trajectory arrays must have equal length");
  for (std::size_t i = 1; i < n; ++i) require(times_[i] > times_[i - 1], "trajectory times must increase");
}

Trajectory integrate_anchor_ode(const Operator& op, const AnchorSchedule& s, const Vector& x0, double t_max,
                                int n_steps, const IntegrationOptions& options) {
  check_grid(t_max, n_steps, options.record_every);
  if (x0.size() != op.dim()) fail(ErrorCode::DimensionMismatch, "initial state does not match operator dimension");
  if (s.family() == ScheduleFamily::Adaptive) {
    fail(ErrorCode::AdaptiveNeedsState, "use integrate_adaptive_ode for the adaptive schedule");
  }
  if (!op.lipschitz() && !options.yosida_lambda) {
    fail(ErrorCode::InvalidArgument, "operator " + op.name() + " is not Lipschitz; set a Yosida parameter");
  }

  std::function<Vector(const Vector&)> a_eff;
  std::string meta = op.name() + ";" + s.name();
  if (options.yosida_lambda) {
    const double lambda = *options.yosida_lambda;
    require(lambda > 0.0, "Yosida parameter must be positive");
    a_eff = [map = ResolventMap(op, lambda), lambda](const Vector& x) { return Vector((x - map(x)) / lambda); };
    meta += ";yosida=" + std::to_string(lambda);
  } else {
    a_eff = [&op](const Vector& x) { return eval(op, x); };
  }

  const Drift drift = [&](double t, const Vector& x) -> Vector {
    return -a_eff(x) - beta_clamped(s, t) * (x - x0);
  };

  const double h = t_max / n_steps;
  Samples out;
  Vector x = x0;
  out.push(0.0, x, a_eff(x), beta_clamped(s, 0.0));
  for (int i = 0; i < n_steps; ++i) {
    const double t = t_max * static_cast<double>(i) / n_steps;
    const double stiffness = h * beta_clamped(s, t) / kMaxAnchorStiffness;
    const int substeps = stiffness > 1.0 ? static_cast<int>(std::min<double>(std::ceil(stiffness), kMaxSubsteps)) : 1;
    Vector next = x;
    for (int j = 0; j < substeps; ++j) {
      next = rk4_step(drift, t + h * j / substeps, next, h / substeps);
    }
    if (!next.allFinite()) {
      std::ostringstream msg;
      msg << "state became non-finite at t = " << t + h << " (" << out.times.size() << " valid samples kept)";
      throw NonFiniteStateError(msg.str(), std::move(out).finish(meta));
    }
    x = std::move(next);
    const int step = i + 1;
    if (step % options.record_every == 0 || step == n_steps) {
      const double t_next = t_max * static_cast<double>(step) / n_steps;
      out.push(t_next, x, a_eff(x), beta_clamped(s, t_next));
    }
  }
  return std::move(out).finish(meta);
}

Vector series_solution_linear(const Matrix& m, double gamma, const Vector& x0, double t, double tol) {
  require(m.rows() == m.cols(), "series solution needs a square matrix");
  if (x0.size() != m.rows()) fail(ErrorCode::DimensionMismatch, "series solution: x0 does not match matrix");
  require(gamma >= 0.0, "series solution needs gamma >= 0");
  require(t >= 0.0, "series solution needs t >= 0");
  require(tol > 0.0, "series tolerance must be positive");

  Vector sum = x0;
  if (t == 0.0 || x0.norm() == 0.0) return sum;

  constexpr int kMaxTerms = 10000;
  constexpr int kQuietTermsNeeded = 3;
  const double log_gamma0 = std::lgamma(gamma + 1.0);
  const double log_t = std::log(t);

  // (-M)^n x0 is carried as exp(log_scale) * direction to keep the power finite.
  Vector direction = x0 / x0.norm();
  double log_scale = std::log(x0.norm());
  double peak = x0.norm();
  int quiet = 0;
  for (int n = 1; n <= kMaxTerms; ++n) {
    direction = -(m * direction);
    const double len = direction.norm();
    if (len == 0.0) return sum;  // nilpotent direction: every further term vanishes
    direction /= len;
    log_scale += std::log(len);
    const double log_coeff = log_gamma0 - std::lgamma(n + gamma + 1.0) + n * log_t + log_scale;
    const double term_norm = std::exp(log_coeff);
    sum += term_norm * direction;
    peak = std::max(peak, term_norm);
    const double ratio = term_norm / std::max(sum.norm(), std::numeric_limits<double>::min());
    quiet = ratio < tol ? quiet + 1 : 0;
    if (quiet >= kQuietTermsNeeded) {
      if (peak * std::numeric_limits<double>::epsilon() > 1e-6 * sum.norm()) {
        fail(ErrorCode::NoConvergence, "series cancellation destroys accuracy at t = " + std::to_string(t) +
                                           "; use integral_solution_linear");
      }
      return sum;
    }
  }
  fail(ErrorCode::NoConvergence, "series did not converge within 10^4 terms at t = " + std::to_string(t));
}

Vector integral_solution_linear(const Matrix& m, const AnchorSchedule& s, const Vector& x0, double t,
                                int quad_nodes) {
  require(m.rows() == m.cols(), "integral solution needs a square matrix");
  if (x0.size() != m.rows()) fail(ErrorCode::DimensionMismatch, "integral solution: x0 does not match matrix");
  require(s.family() == ScheduleFamily::PowerLaw || s.family() == ScheduleFamily::StronglyMonotone,
          "integral solution needs a power-law or strongly monotone schedule");
  require(t > 0.0, "integral solution needs t > 0");
  require(quad_nodes >= 64, "integral solution needs at least 64 quadrature nodes");

  const auto rule = graded_gauss_legendre(t, std::max<std::size_t>(1, static_cast<std::size_t>(quad_nodes) / 20));
  const double bound = (1.0 + 1e-8) * x0.norm();
  Vector integral = Vector::Zero(x0.size());
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double s_j = rule.nodes[j];
    const double ratio = contraction_ratio(s, s_j, t);
    const Vector propagated = expm((s_j - t) * m) * x0;
    if (!(ratio <= 1.0 + 1e-8) || !(ratio * propagated.norm() <= bound)) {
      fail(ErrorCode::QuadratureUnstable, "integrand ratio exceeds 1 at s = " + std::to_string(s_j));
    }
    integral += (rule.weights[j] * ratio * beta_at(s, s_j)) * propagated;
  }
  const double initial_weight = contraction_ratio(s, 0.0, t);
  if (initial_weight != 0.0) integral += initial_weight * (expm(-t * m) * x0);
  return integral;
}

Trajectory integrate_adaptive_ode(const Operator& op, const Vector& x0, double t_max, int n_steps,
                                  int record_every) {
  check_grid(t_max, n_steps, record_every);
  if (x0.size() != op.dim()) fail(ErrorCode::DimensionMismatch, "initial state does not match operator dimension");
  require(op.lipschitz().has_value(), "the adaptive flow needs a single-valued operator");
  const Vector a0 = eval(op, x0);
  require(a0.squaredNorm() > kZeroResidualSq, "the adaptive flow needs A(x0) != 0");

  auto adaptive_beta = [&](double t, const Vector& x, const Vector& ax) {
    if (t < kAdaptiveSingularWindow) return 1.0 / t;
    const double aa = ax.squaredNorm();
    if (aa <= kZeroResidualSq) return 0.0;
    const double inner = ax.dot(x - x0);
    if (inner >= -kZeroResidualSq) {
      std::ostringstream msg;
      msg << "<A(X), X - X0> = " << inner << " with |A(X)|^2 = " << aa << " at t = " << t;
      fail(ErrorCode::DenominatorVanished, msg.str());
    }
    return -aa / (2.0 * inner);
  };

  const Drift drift = [&](double t, const Vector& x) -> Vector {
    const Vector ax = eval(op, x);
    // At t = 0 the anchor term tends to -A(X0)/2 (beta ~ 1/t, X - X0 ~ -t A(X0)/2).
    if (t == 0.0) return Vector(-0.5 * ax);
    return -ax - adaptive_beta(t, x, ax) * (x - x0);
  };

  const double h = t_max / n_steps;
  const std::string meta = op.name() + ";adaptive";
  Samples out;
  Vector x = x0;
  out.push(0.0, x, a0, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n_steps; ++i) {
    const double t = t_max * static_cast<double>(i) / n_steps;
    Vector next = rk4_step(drift, t, x, h);
    if (!next.allFinite()) {
      std::ostringstream msg;
      msg << "state became non-finite at t = " << t + h;
      throw NonFiniteStateError(msg.str(), std::move(out).finish(meta));
    }
    x = std::move(next);
    const int step = i + 1;
    if (step % record_every == 0 || step == n_steps) {
      const double t_next = t_max * static_cast<double>(step) / n_steps;
      Vector ax = eval(op, x);
      const double b = adaptive_beta(t_next, x, ax);
      out.push(t_next, x, std::move(ax), b);
    }
  }
  return std::move(out).finish(meta);
}

bool flow_nonexpansive_check(const Operator& op, const AnchorSchedule& s, const Vector& x0, const Vector& y0,
                             double t_max, int n_steps, const IntegrationOptions& options) {
  require_same_dim(x0, y0, "flow_nonexpansive_check");
  const Trajectory a = integrate_anchor_ode(op, s, x0, t_max, n_steps, options);
  const Trajectory b = integrate_anchor_ode(op, s, y0, t_max, n_steps, options);
  const double limit = (x0 - y0).norm() * (1.0 + 1e-6) + 1e-9;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a.states()[i] - b.states()[i]).norm() > limit) return false;
  }
  return true;
}

}  // namespace anchor
