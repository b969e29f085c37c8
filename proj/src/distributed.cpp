#include "anchor/distributed.hpp"

#include "anchor/error.hpp"
#include "anchor/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace anchor {

namespace {

constexpr int kMaxErdosRenyiDraws = 100;

std::vector<std::pair<int, int>> normalize_edges(int n, const std::vector<std::pair<int, int>>& raw) {
  std::set<std::pair<int, int>> unique;
  for (auto [i, j] : raw) {
    require(i >= 0 && j >= 0 && i < n && j < n, "edge endpoint out of range");
    require(i != j, "self loops are not allowed");
    unique.emplace(std::min(i, j), std::max(i, j));
  }
  return {unique.begin(), unique.end()};
}

Matrix metropolis_hastings(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (auto [i, j] : edges) {
    ++degree[static_cast<std::size_t>(i)];
    ++degree[static_cast<std::size_t>(j)];
  }
  Matrix w = Matrix::Zero(n, n);
  for (auto [i, j] : edges) {
    const double weight = 1.0 / (1.0 + std::max(degree[static_cast<std::size_t>(i)], degree[static_cast<std::size_t>(j)]));
    w(i, j) = weight;
    w(j, i) = weight;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

}  // namespace

bool is_connected(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 1) return n == 1;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (auto [i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = true;
        ++reached;
        frontier.push(u);
      }
    }
  }
  return reached == n;
}

NetworkGraph make_network(const TopologySpec& topology, int n) {
  require(n >= 1, "network needs at least one agent");
  std::vector<std::pair<int, int>> edges;
  switch (topology.kind) {
    case Topology::Path:
      for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case Topology::Ring:
      for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n >= 3) edges.emplace_back(0, n - 1);
      break;
    case Topology::ExplicitEdges: edges = topology.edges; break;
    case Topology::ErdosRenyi: {
      require(topology.prob > 0.0 && topology.prob <= 1.0, "edge probability must lie in (0, 1]");
      std::mt19937_64 rng(topology.seed);
      std::bernoulli_distribution coin(topology.prob);
      bool found = false;
      for (int draw = 0; draw < kMaxErdosRenyiDraws && !found; ++draw) {
        edges.clear();
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            if (coin(rng)) edges.emplace_back(i, j);
          }
        }
        found = is_connected(n, edges);
      }
      if (!found) fail(ErrorCode::DisconnectedGraph, "no connected Erdos-Renyi draw in 100 attempts");
      break;
    }
  }
  NetworkGraph g;
  g.n_agents = n;
  g.edges = normalize_edges(n, edges);
  if (!is_connected(n, g.edges)) fail(ErrorCode::DisconnectedGraph, "agent network is not connected");
  g.W = metropolis_hastings(n, g.edges);
  return g;
}

SensingProblem gen_problem(const ProblemConfig& c) {
  require(c.d >= 1 && c.n_agents >= 1 && c.m_per_agent >= 1, "problem sizes must be positive");
  require(c.noise_sigma >= 0.0 && c.lambda >= 0.0, "noise and lambda must be nonnegative");
  require(c.alpha > 0.0, "step alpha must be positive");
  require(c.sparsity >= 0.0 && c.sparsity <= 1.0, "sparsity must lie in [0, 1]");

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SensingProblem p;
  p.d = c.d;
  p.lambda = c.lambda;
  p.alpha = c.alpha;
  p.rng_seed = c.seed;

  const double scale = 1.0 / std::sqrt(static_cast<double>(c.m_per_agent));
  for (int i = 0; i < c.n_agents; ++i) {
    Matrix a(c.m_per_agent, c.d);
    for (int r = 0; r < c.m_per_agent; ++r) {
      for (int col = 0; col < c.d; ++col) a(r, col) = scale * normal(rng);
    }
    p.a.push_back(std::move(a));
  }

  const auto nonzeros = static_cast<int>(std::ceil(c.sparsity * c.d - 1e-12));
  std::vector<int> index(static_cast<std::size_t>(c.d));
  std::iota(index.begin(), index.end(), 0);
  std::shuffle(index.begin(), index.end(), rng);
  p.x_true = Vector::Zero(c.d);
  for (int j = 0; j < nonzeros; ++j) p.x_true[index[static_cast<std::size_t>(j)]] = normal(rng);

  for (int i = 0; i < c.n_agents; ++i) {
    Vector noise(c.m_per_agent);
    for (int r = 0; r < c.m_per_agent; ++r) noise[r] = c.noise_sigma * normal(rng);
    p.b.push_back(p.a[static_cast<std::size_t>(i)] * p.x_true + noise);
  }
  return p;
}

PgExtraState pg_extra_init(const SensingProblem& problem, const std::optional<Matrix>& x0) {
  PgExtraState s;
  const int n = problem.n_agents();
  if (x0) {
    if (x0->rows() != problem.d || x0->cols() != n) {
      fail(ErrorCode::DimensionMismatch, "initial iterate must be d x n_agents");
    }
    s.x = *x0;
  } else {
    s.x = Matrix::Zero(problem.d, n);
  }
  s.w = Matrix::Zero(problem.d, n);
  return s;
}

PgExtraState pg_extra_step(const PgExtraState& state, const SensingProblem& problem, const NetworkGraph& graph) {
  const int n = problem.n_agents();
  if (graph.n_agents != n || state.x.cols() != n || state.x.rows() != problem.d || state.w.cols() != n ||
      state.w.rows() != problem.d) {
    fail(ErrorCode::DimensionMismatch, "PG-EXTRA state, problem and graph disagree on sizes");
  }
  const Matrix mixed = state.x * graph.W;  // column i = sum_j W_ij x_j (W symmetric)
  const double threshold = problem.alpha * problem.lambda;
  PgExtraState next;
  next.x.resize(problem.d, n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Vector grad = problem.a[idx].transpose() * (problem.a[idx] * state.x.col(i) - problem.b[idx]);
    next.x.col(i) = soft_threshold(mixed.col(i) - problem.alpha * grad - state.w.col(i), threshold);
  }
  next.w = state.w + 0.5 * (state.x - mixed);
  next.k = state.k + 1;
  return next;
}

PgExtraMap::PgExtraMap(SensingProblem problem, NetworkGraph graph)
    : problem_(std::move(problem)), graph_(std::move(graph)), d_(problem_.d), n_(problem_.n_agents()) {
  if (graph_.n_agents != n_) fail(ErrorCode::DimensionMismatch, "graph and problem disagree on the agent count");

  const Matrix identity = Matrix::Identity(n_, n_);
  Eigen::SelfAdjointEigenSolver<Matrix> mix(0.5 * (identity + graph_.W));
  double l_max = 0.0;
  for (const auto& a : problem_.a) l_max = std::max(l_max, spectral_norm(a.transpose() * a));
  step_bound_ = l_max > 0.0 ? 2.0 * mix.eigenvalues().minCoeff() / l_max : std::numeric_limits<double>::infinity();

  Eigen::SelfAdjointEigenSolver<Matrix> half_laplacian(0.5 * (identity - graph_.W));
  const Vector ev = half_laplacian.eigenvalues().cwiseMax(0.0);
  const Matrix& v = half_laplacian.eigenvectors();
  Vector root = ev.cwiseSqrt();
  Vector root_inv(root.size());
  for (Eigen::Index i = 0; i < root.size(); ++i) root_inv[i] = root[i] > 1e-12 ? 1.0 / root[i] : 0.0;
  u_ = v * root.asDiagonal() * v.transpose();
  u_pinv_ = v * root_inv.asDiagonal() * v.transpose();
}

Vector PgExtraMap::pack(const PgExtraState& state) const {
  Vector z(static_cast<Eigen::Index>(size()));
  const Eigen::Index half = static_cast<Eigen::Index>(d_) * n_;
  z.head(half) = state.x.reshaped();
  z.tail(half) = state.w.reshaped();
  return z;
}

PgExtraState PgExtraMap::unpack(const Vector& z) const {
  if (static_cast<std::size_t>(z.size()) != size()) fail(ErrorCode::DimensionMismatch, "stacked state has wrong size");
  const Eigen::Index half = static_cast<Eigen::Index>(d_) * n_;
  PgExtraState s;
  s.x = z.head(half).reshaped(d_, n_);
  s.w = z.tail(half).reshaped(d_, n_);
  return s;
}

Vector PgExtraMap::apply(const Vector& z) const { return pack(pg_extra_step(unpack(z), problem_, graph_)); }

double PgExtraMap::m_inner(const Vector& a, const Vector& b) const {
  const PgExtraState sa = unpack(a);
  const PgExtraState sb = unpack(b);
  const double alpha = problem_.alpha;
  // Agent index is the column index, so U acts from the right.
  const Matrix ua = sa.w * u_pinv_ / alpha;
  const Matrix ub = sb.w * u_pinv_ / alpha;
  return sa.x.cwiseProduct(sb.x).sum() / alpha + sa.x.cwiseProduct(ub * u_).sum() +
         (ua * u_).cwiseProduct(sb.x).sum() + alpha * ua.cwiseProduct(ub).sum();
}

PgExtraMap as_fixed_point_operator(const SensingProblem& problem, const NetworkGraph& graph) {
  PgExtraMap map(problem, graph);
  if (!(problem.alpha < map.step_bound())) {
    std::ostringstream msg;
    msg << "alpha = " << problem.alpha << " violates the PG-EXTRA bound " << map.step_bound();
    fail(ErrorCode::StepSizeTooLarge, msg.str());
  }
  return map;
}

ResidualSeries run_anchored_pgextra(const PgExtraMap& map, const AnchorSchedule& anchor, int iterations,
                                    AnchorComposition composition, const std::optional<Vector>& z0) {
  require(iterations >= 1, "PG-EXTRA needs at least one iteration");
  require(anchor.family() != ScheduleFamily::StronglyMonotone, "PG-EXTRA anchoring supports power-law, adaptive or none");
  const Vector start = z0 ? *z0 : map.pack(pg_extra_init(map.problem()));
  if (static_cast<std::size_t>(start.size()) != map.size()) fail(ErrorCode::DimensionMismatch, "bad initial state");

  ResidualSeries out;
  out.k.reserve(static_cast<std::size_t>(iterations));
  const bool vanilla = anchor.family() == ScheduleFamily::None;
  Vector y = start;
  for (int k = 1; k <= iterations; ++k) {
    const Vector ty = map.apply(y);
    const Vector r = y - ty;
    out.k.push_back(k);
    out.resid_sq_euclid.push_back(r.squaredNorm());
    out.resid_sq_m.push_back(map.m_norm_sq(r));

    double b = 0.0;
    if (anchor.family() == ScheduleFamily::PowerLaw) {
      const double kp = std::pow(static_cast<double>(k), anchor.p());
      b = anchor.gamma() / (kp + anchor.gamma());
    } else if (anchor.family() == ScheduleFamily::Adaptive) {
      if (composition == AnchorComposition::ResolventForm) {
        b = beta_adaptive_from_products(out.resid_sq_m.back(), map.m_inner(r, ty - start));
      } else {
        // T = 2J - I with J = (I + T)/2: residual (y - Ty)/2 at x = (y + Ty)/2.
        const Vector half_r = 0.5 * r;
        b = beta_adaptive_from_products(map.m_norm_sq(half_r), map.m_inner(half_r, 0.5 * (y + ty) - start));
      }
    }
    out.beta.push_back(b);

    if (vanilla || composition == AnchorComposition::HalpernOnMap) {
      y = ty + b * (start - ty);
    } else {
      const Vector reflected = 2.0 * ty - y;
      y = reflected + b * (start - reflected);
    }
  }
  out.final_state = y;
  return out;
}

double consensus_error(const Matrix& x) {
  const Vector mean = x.rowwise().mean();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) worst = std::max(worst, (x.col(i) - mean).norm());
  return worst;
}

}  // namespace anchor
