#pragma once

#include "anchor/error.hpp"
#include "anchor/linalg.hpp"
#include "anchor/operators.hpp"
#include "anchor/schedules.hpp"

#include <optional>
#include <string>
#include <vector>

namespace anchor {

// Sampled solution of the anchor ODE
//   X'(t) = -A(X) - beta(t) (X - X0).
// residuals() holds the selection A(X(t_i)) (or its Yosida surrogate).
class Trajectory {
 public:
  Trajectory(std::vector<double> times, std::vector<Vector> states, std::vector<Vector> residuals,
             std::vector<double> betas, std::string meta);

  const std::vector<double>& times() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  const std::vector<Vector>& residuals() const { return residuals_; }
  const std::vector<double>& betas() const { return betas_; }
  const std::string& meta() const { return meta_; }
  std::size_t size() const { return times_.size(); }
  const Vector& initial_state() const { return states_.front(); }

 private:
  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Vector> residuals_;
  std::vector<double> betas_;
  std::string meta_;
};

// Raised when the state blows up; carries the valid prefix of the run.
class NonFiniteStateError : public Error {
 public:
  NonFiniteStateError(const std::string& what, Trajectory prefix)
      : Error(ErrorCode::NonFiniteState, what), prefix_(std::move(prefix)) {}
  const Trajectory& prefix() const { return prefix_; }

 private:
  Trajectory prefix_;
};

struct IntegrationOptions {
  /// Set for operators without a Lipschitz constant (l1); A is then replaced
  /// by its Yosida approximation with this parameter.
  std::optional<double> yosida_lambda;
  /// Store every n-th RK4 step (the final step is always stored).
  int record_every = 1;
};

/// Fixed-step RK4 on the clamped anchor ODE.
Trajectory integrate_anchor_ode(const Operator& op, const AnchorSchedule& s, const Vector& x0, double t_max,
                                int n_steps, const IntegrationOptions& options = {});

/// Closed-form solution for beta = gamma/t and linear A = M:
///   X(t) = sum_n Gamma(gamma+1)/Gamma(n+gamma+1) (-tM)^n x0.
/// gamma = 0 gives exp(-tM) x0.
Vector series_solution_linear(const Matrix& m, double gamma, const Vector& x0, double t, double tol = 1e-14);

/// Closed-form solution for linear A = M and a power-law or strongly monotone
/// schedule, by quadrature of
///   X(t) = [ int_0^t e^{(s-t)M} C(s)/C(t) beta(s) ds + C(0)/C(t) e^{-tM} ] x0.
/// quad_nodes is the node budget of the uniform part of the composite rule.
Vector integral_solution_linear(const Matrix& m, const AnchorSchedule& s, const Vector& x0, double t,
                                int quad_nodes = 512);

/// RK4 on the adaptive anchor ODE, beta = -|A(X)|^2 / (2 <A(X), X - X0>),
/// recomputed at every stage.
Trajectory integrate_adaptive_ode(const Operator& op, const Vector& x0, double t_max, int n_steps,
                                  int record_every = 1);

/// Integrates the flows from x0 and y0 on a shared grid and checks
/// max_t |X(t) - Y(t)| <= |x0 - y0| (1 + 1e-6) + 1e-9.
bool flow_nonexpansive_check(const Operator& op, const AnchorSchedule& s, const Vector& x0, const Vector& y0,
                             double t_max, int n_steps, const IntegrationOptions& options = {});

}  // namespace anchor
