#include "anchor/solvers.hpp"

#include "anchor/error.hpp"
#include "anchor/schedules.hpp"

#include <cmath>

namespace anchor {

namespace {

void check_config(const SolverConfig& cfg) {
  require(cfg.max_iter >= 1, "max_iter must be at least 1");
  require(cfg.h > 0.0 && std::isfinite(cfg.h), "resolvent step h must be positive");
  require(cfg.record_every >= 1, "record_every must be positive");
}

IterateLog start_log(const Operator& op, const Vector& x0, const SolverConfig& cfg, std::string method) {
  check_config(cfg);
  if (x0.size() != op.dim()) fail(ErrorCode::DimensionMismatch, "initial point does not match operator dimension");
  IterateLog log;
  log.x0 = x0;
  log.h = cfg.h;
  log.method = std::move(method);
  const auto expected = static_cast<std::size_t>(cfg.max_iter / cfg.record_every + 1);
  log.ks.reserve(expected);
  log.xs.reserve(expected);
  log.ys.reserve(expected);
  log.residuals.reserve(expected);
  log.betas.reserve(expected);
  return log;
}

void record(IterateLog& log, const SolverConfig& cfg, int k, const Vector& x, const Vector& y_prev,
            const Vector& y, double beta) {
  if (k % cfg.record_every != 0 && k != 1 && k != cfg.max_iter) return;
  log.ks.push_back(k);
  log.xs.push_back(x);
  log.ys.push_back(y);
  log.residuals.push_back((y_prev - x) / cfg.h);
  log.betas.push_back(beta);
}

}  // namespace

std::vector<double> IterateLog::residual_sq() const {
  std::vector<double> out;
  out.reserve(residuals.size());
  for (const auto& r : residuals) out.push_back(r.squaredNorm());
  return out;
}

IterateLog run_generalized_anchor(const Operator& op, double gamma, double p, const Vector& x0,
                                  const SolverConfig& cfg) {
  require(gamma > 0.0 && p > 0.0, "generalized anchoring needs gamma > 0 and p > 0");
  IterateLog log = start_log(op, x0, cfg, "generalized_anchor");
  const ResolventMap resolve(op, cfg.h);
  Vector y = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const Vector x = resolve(y);
    const double kp = std::pow(static_cast<double>(k), p);
    const double anchor = gamma / (kp + gamma);
    const Vector reflected = 2.0 * x - y;
    Vector y_next = reflected + anchor * (x0 - reflected);
    record(log, cfg, k, x, y, y_next, anchor);
    y = std::move(y_next);
  }
  return log;
}

IterateLog run_appm(const Operator& op, const Vector& x0, const SolverConfig& cfg) {
  IterateLog log = run_generalized_anchor(op, 1.0, 1.0, x0, cfg);
  log.method = "appm";
  return log;
}

IterateLog run_halpern(const Operator& op, const std::function<double(int)>& beta, const Vector& y0,
                       const SolverConfig& cfg) {
  IterateLog log = start_log(op, y0, cfg, "halpern");
  const ResolventMap resolve(op, cfg.h);
  Vector y = y0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    const double b = beta(k);
    require(b >= 0.0 && b <= 1.0, "Halpern weights must lie in [0, 1]");
    const Vector x = resolve(y);
    const Vector reflected = 2.0 * x - y;
    Vector y_next = reflected + b * (y0 - reflected);
    record(log, cfg, k + 1, x, y, y_next, b);
    y = std::move(y_next);
  }
  return log;
}

IterateLog run_halpern(const Operator& op, const std::vector<double>& beta, const Vector& y0,
                       const SolverConfig& cfg) {
  require(beta.size() >= static_cast<std::size_t>(cfg.max_iter), "Halpern weight sequence is shorter than max_iter");
  return run_halpern(op, [&beta](int k) { return beta[static_cast<std::size_t>(k)]; }, y0, cfg);
}

IterateLog run_osppm(const Operator& op, double mu, const Vector& x0, const SolverConfig& cfg) {
  require(mu >= 0.0 && std::isfinite(mu), "OS-PPM needs mu >= 0");
  IterateLog log = start_log(op, x0, cfg, "osppm");
  const ResolventMap resolve(op, cfg.h);
  const double nu = 1.0 + 2.0 * cfg.h * mu;
  const double nu_sq = nu * nu;
  // 1/s_k through s_k = 1 + nu^2 s_{k-1}; never forms nu^{2k}.
  double inv_s = 1.0;
  Vector y = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    inv_s = inv_s / (inv_s + nu_sq);
    const Vector x = resolve(y);
    const Vector extrapolated = x - (y - x) / nu;
    Vector y_next = extrapolated + inv_s * (x0 - extrapolated);
    record(log, cfg, k, x, y, y_next, inv_s);
    y = std::move(y_next);
  }
  return log;
}

IterateLog run_adaptive(const Operator& op, const Vector& x0, const SolverConfig& cfg) {
  IterateLog log = start_log(op, x0, cfg, "adaptive");
  const ResolventMap resolve(op, cfg.h);
  Vector y = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const Vector x = resolve(y);
    const double b = beta_adaptive_discrete(y - x, x, x0);
    const Vector reflected = 2.0 * x - y;
    Vector y_next = reflected + b * (x0 - reflected);
    record(log, cfg, k, x, y, y_next, b);
    y = std::move(y_next);
  }
  return log;
}

}  // namespace anchor
