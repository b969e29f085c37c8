#pragma once

#include "anchor/linalg.hpp"
#include "anchor/operators.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace anchor {

struct SolverConfig {
  int max_iter = 1000;
  /// Resolvent step: iterations use J_{hA}.
  double h = 1.0;
  int record_every = 1;
};

// Iterates of an anchored resolvent method. Entry j describes iteration
// k = ks[j] (k starts at 1):
//   xs[j] = x^k = J_{hA}(y^{k-1}),  ys[j] = y^k,
//   residuals[j] = (y^{k-1} - x^k) / h  (an element of A(x^k)),
//   betas[j] = anchor weight used to form y^k.
struct IterateLog {
  Vector x0;
  double h = 1.0;
  std::string method;
  std::vector<int> ks;
  std::vector<Vector> xs;
  std::vector<Vector> ys;
  std::vector<Vector> residuals;
  std::vector<double> betas;

  std::size_t size() const { return ks.size(); }
  std::vector<double> residual_sq() const;
};

/// x^k = J_{hA} y^{k-1},
/// y^k = k^p/(k^p+gamma) (2x^k - y^{k-1}) + gamma/(k^p+gamma) x^0,  y^0 = x^0.
IterateLog run_generalized_anchor(const Operator& op, double gamma, double p, const Vector& x0,
                                  const SolverConfig& cfg = {});

/// Accelerated proximal point method (gamma = p = 1 in the recursion above).
IterateLog run_appm(const Operator& op, const Vector& x0, const SolverConfig& cfg = {});

/// Halpern iteration y^{k+1} = beta_k y^0 + (1 - beta_k) R_{hA} y^k, k = 0, 1, ...
/// Logged with the APPM indexing: entry k holds y^k and x^k = J_{hA} y^{k-1}.
IterateLog run_halpern(const Operator& op, const std::function<double(int)>& beta, const Vector& y0,
                       const SolverConfig& cfg = {});
IterateLog run_halpern(const Operator& op, const std::vector<double>& beta, const Vector& y0,
                       const SolverConfig& cfg = {});

/// Optimal method for mu-strongly monotone operators (OS-PPM):
///   y^k = (1 - 1/s_k)(x^k - (y^{k-1} - x^k)/nu) + y^0/s_k,
/// nu = 1 + 2 h mu, s_k = 1 + nu^2 + ... + nu^{2k}. mu = 0 reduces to APPM.
IterateLog run_osppm(const Operator& op, double mu, const Vector& x0, const SolverConfig& cfg = {});

/// Adaptive anchoring: y^k = (1 - beta_k)(2x^k - y^{k-1}) + beta_k x^0 with
/// beta_k from beta_adaptive_discrete on the scaled residual y^{k-1} - x^k.
IterateLog run_adaptive(const Operator& op, const Vector& x0, const SolverConfig& cfg = {});

}  // namespace anchor
