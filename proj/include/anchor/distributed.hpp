#pragma once

#include "anchor/linalg.hpp"
#include "anchor/schedules.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace anchor {

enum class Topology { Path, Ring, ErdosRenyi, ExplicitEdges };

struct TopologySpec {
  Topology kind = Topology::Ring;
  double prob = 0.5;       ///< Erdos-Renyi edge probability
  std::uint64_t seed = 0;  ///< Erdos-Renyi seed
  std::vector<std::pair<int, int>> edges;

  static TopologySpec path() { return {Topology::Path, 0.0, 0, {}}; }
  static TopologySpec ring() { return {Topology::Ring, 0.0, 0, {}}; }
  static TopologySpec erdos_renyi(double prob, std::uint64_t seed) { return {Topology::ErdosRenyi, prob, seed, {}}; }
  static TopologySpec explicit_edges(std::vector<std::pair<int, int>> e) {
    return {Topology::ExplicitEdges, 0.0, 0, std::move(e)};
  }
};

// Undirected agent network with its Metropolis-Hastings mixing matrix
//   W_ij = 1 / (1 + max(deg_i, deg_j)) on edges,  W_ii = 1 - sum_{j != i} W_ij.
struct NetworkGraph {
  int n_agents = 0;
  std::vector<std::pair<int, int>> edges;  ///< i < j, sorted, unique
  Matrix W;
};

/// Throws DisconnectedGraph unless the graph is connected (Erdos-Renyi
/// redraws up to 100 times first).
NetworkGraph make_network(const TopologySpec& topology, int n);

bool is_connected(int n, const std::vector<std::pair<int, int>>& edges);

struct ProblemConfig {
  std::uint64_t seed = 0;
  int d = 20;
  int n_agents = 6;
  int m_per_agent = 4;
  double noise_sigma = 0.01;
  double sparsity = 0.2;
  double lambda = 0.01;
  double alpha = 0.01;

  static ProblemConfig desk_scale(std::uint64_t seed = 0) {
    ProblemConfig c;
    c.seed = seed;
    return c;
  }
  /// d = 100, n = 20 agents.
  static ProblemConfig full_scale(std::uint64_t seed = 0) {
    ProblemConfig c;
    c.seed = seed;
    c.d = 100;
    c.n_agents = 20;
    return c;
  }
};

// Decentralized l1-regularized least squares:
//   minimize (1/n) sum_i { 1/2 |A_i x - b_i|^2 + lambda |x|_1 }.
struct SensingProblem {
  int d = 0;
  std::vector<Matrix> a;  ///< per-agent m_i x d measurement matrices
  std::vector<Vector> b;
  double lambda = 0.0;
  double alpha = 0.0;  ///< PG-EXTRA step
  Vector x_true;
  std::uint64_t rng_seed = 0;

  int n_agents() const { return static_cast<int>(a.size()); }
};

/// Deterministic in the seed: A_i ~ N(0, 1/m_i) entrywise, ceil(sparsity d)
/// standard normal nonzeros in x_true, noise ~ N(0, sigma^2).
SensingProblem gen_problem(const ProblemConfig& config);

// Column i of x and w belongs to agent i (d x n).
struct PgExtraState {
  Matrix x;
  Matrix w;
  int k = 0;
};

/// x^0 = given (zero by default), w^0 = 0.
PgExtraState pg_extra_init(const SensingProblem& problem, const std::optional<Matrix>& x0 = std::nullopt);

/// One PG-EXTRA iteration:
///   x_i <- prox_{alpha lambda |.|_1}( sum_j W_ij x_j - alpha A_i^T (A_i x_i - b_i) - w_i )
///   w_i <- w_i + (x_i - sum_j W_ij x_j) / 2
/// (both right-hand sides use the old iterate).
PgExtraState pg_extra_step(const PgExtraState& state, const SensingProblem& problem, const NetworkGraph& graph);

// PG-EXTRA as a map on the stacked state z = [vec(x); vec(w)]. It is
// 1/2-averaged in the metric
//   |z|_M^2 = |x|^2/alpha + 2 <x, U u> + alpha |u|^2,   U u = w / alpha,
// with U the symmetric square root of (I - W)/2 acting per coordinate.
class PgExtraMap {
 public:
  PgExtraMap(SensingProblem problem, NetworkGraph graph);

  Vector apply(const Vector& z) const;
  Vector pack(const PgExtraState& state) const;
  PgExtraState unpack(const Vector& z) const;
  std::size_t size() const { return static_cast<std::size_t>(2 * d_ * n_); }

  double m_inner(const Vector& a, const Vector& b) const;
  double m_norm_sq(const Vector& z) const { return m_inner(z, z); }

  /// 2 lambda_min((I + W)/2) / max_i |A_i^T A_i|.
  double step_bound() const { return step_bound_; }
  const SensingProblem& problem() const { return problem_; }
  const NetworkGraph& graph() const { return graph_; }

 private:
  SensingProblem problem_;
  NetworkGraph graph_;
  int d_ = 0;
  int n_ = 0;
  double step_bound_ = 0.0;
  Matrix u_;       ///< U
  Matrix u_pinv_;  ///< pseudo-inverse of U
};

/// Checks alpha against the PG-EXTRA step bound (StepSizeTooLarge).
PgExtraMap as_fixed_point_operator(const SensingProblem& problem, const NetworkGraph& graph);

// How the anchor is attached to the averaged map T.
enum class AnchorComposition {
  /// T plays the resolvent: x^k = T y^{k-1}, y^k = (1-b)(2x^k - y^{k-1}) + b z^0.
  ResolventForm,
  /// Halpern directly on T: z^k = (1-b) T z^{k-1} + b z^0.
  HalpernOnMap,
};

struct ResidualSeries {
  std::vector<int> k;
  std::vector<double> resid_sq_euclid;  ///< |z - T z|^2 at the point T was applied to
  std::vector<double> resid_sq_m;
  std::vector<double> beta;
  Vector final_state;
};

/// K iterations of PG-EXTRA with anchoring: power law b_k = gamma/(k^p + gamma),
/// adaptive b_k from the discrete adaptive rule in the M inner product, or the
/// None schedule for vanilla PG-EXTRA.
ResidualSeries run_anchored_pgextra(const PgExtraMap& map, const AnchorSchedule& anchor, int iterations,
                                    AnchorComposition composition = AnchorComposition::ResolventForm,
                                    const std::optional<Vector>& z0 = std::nullopt);

/// max_i |x_i - mean_j x_j|.
double consensus_error(const Matrix& x);

}  // namespace anchor
