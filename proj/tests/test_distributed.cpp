#include "anchor/distributed.hpp"
#include "anchor/error.hpp"
#include "anchor/operators.hpp"
#include "test_util.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

using namespace anchor;
using anchor::test::check_close;

namespace {

Matrix stacked_a(const SensingProblem& p) {
  Matrix a(p.n_agents() * p.a.front().rows(), p.d);
  Eigen::Index row = 0;
  for (const auto& ai : p.a) {
    a.middleRows(row, ai.rows()) = ai;
    row += ai.rows();
  }
  return a;
}

Vector stacked_b(const SensingProblem& p) {
  Vector b(p.n_agents() * p.b.front().size());
  Eigen::Index row = 0;
  for (const auto& bi : p.b) {
    b.segment(row, bi.size()) = bi;
    row += bi.size();
  }
  return b;
}

void check_mixing(const NetworkGraph& g) {
  const int n = g.n_agents;
  CHECK((g.W - g.W.transpose()).norm() == 0.0);
  for (int i = 0; i < n; ++i) CHECK(std::abs(g.W.row(i).sum() - 1.0) <= 1e-12);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || g.W(i, j) == 0.0) continue;
      const bool edge = std::find(g.edges.begin(), g.edges.end(), std::make_pair(std::min(i, j), std::max(i, j))) !=
                        g.edges.end();
      CHECK(edge);
    }
  }
  const Matrix centered = g.W - Matrix::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered);
  CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

// Random stacked state whose w block sums to zero across agents.
Vector random_state(const PgExtraMap& map, std::mt19937_64& rng) {
  const auto& p = map.problem();
  std::normal_distribution<double> normal;
  Matrix x(p.d, p.n_agents()), w(p.d, p.n_agents());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.01 * normal(rng);
  w = w * (Matrix::Identity(p.n_agents(), p.n_agents()) - map.graph().W);
  return map.pack({x, w, 0});
}

}  // namespace

TEST_CASE("Metropolis-Hastings weights") {
  const auto path = make_network(TopologySpec::path(), 3);
  Matrix expected(3, 3);
  expected << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3;
  check_close(path.W.reshaped(), expected.reshaped(), 1e-15);

  const auto ring = make_network(TopologySpec::ring(), 3);
  check_close(ring.W.reshaped(), Matrix::Constant(3, 3, 1.0 / 3).reshaped(), 1e-15);

  const auto single = make_network(TopologySpec::ring(), 1);
  CHECK(single.W.rows() == 1);
  CHECK(single.W(0, 0) == 1.0);

  for (const auto& g : {path, ring, make_network(TopologySpec::ring(), 8),
                        make_network(TopologySpec::erdos_renyi(0.3, 4), 12),
                        make_network(TopologySpec::explicit_edges({{0, 1}, {1, 2}, {2, 0}, {2, 3}}), 4)}) {
    check_mixing(g);
  }
}

TEST_CASE("disconnected networks are rejected") {
  try {
    make_network(TopologySpec::explicit_edges({{0, 1}}), 3);
    FAIL("expected DisconnectedGraph");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DisconnectedGraph);
  }
  CHECK_THROWS_AS(make_network(TopologySpec::erdos_renyi(1e-9, 1), 10), Error);
  CHECK_THROWS_AS(make_network(TopologySpec::explicit_edges({{0, 5}}), 3), Error);
  CHECK_FALSE(is_connected(0, {}));
  CHECK(is_connected(4, {{0, 1}, {1, 2}, {3, 2}}));
}

TEST_CASE("problem generation is deterministic") {
  const auto a = gen_problem(ProblemConfig::desk_scale(7));
  const auto b = gen_problem(ProblemConfig::desk_scale(7));
  const auto c = gen_problem(ProblemConfig::desk_scale(8));
  REQUIRE(a.n_agents() == 6);
  for (int i = 0; i < a.n_agents(); ++i) {
    CHECK(a.a[i] == b.a[i]);
    CHECK(a.b[i] == b.b[i]);
  }
  CHECK(a.x_true == b.x_true);
  CHECK(a.a[0] != c.a[0]);
  CHECK((a.x_true.array() != 0.0).count() == 4);

  auto cfg = ProblemConfig::desk_scale(3);
  cfg.sparsity = 0.0;
  cfg.noise_sigma = 0.0;
  const auto zero = gen_problem(cfg);
  CHECK(zero.x_true.norm() == 0.0);
  for (const auto& bi : zero.b) CHECK(bi.norm() == 0.0);

  const auto full = ProblemConfig::full_scale();
  CHECK(full.d == 100);
  CHECK(full.n_agents == 20);
}

TEST_CASE("noise-free measurements determine the signal") {
  auto cfg = ProblemConfig::desk_scale(11);
  cfg.noise_sigma = 0.0;
  cfg.lambda = 0.0;
  const auto p = gen_problem(cfg);
  const Vector ls = stacked_a(p).colPivHouseholderQr().solve(stacked_b(p));
  for (int j = 0; j < p.d; ++j) {
    if (p.x_true[j] != 0.0) CHECK(std::abs(ls[j] - p.x_true[j]) <= 1e-10);
  }
  CHECK((ls - p.x_true).norm() <= 1e-10);
}

TEST_CASE("single agent PG-EXTRA is gradient descent") {
  ProblemConfig cfg;
  cfg.seed = 21;
  cfg.d = 5;
  cfg.n_agents = 1;
  cfg.m_per_agent = 8;
  cfg.lambda = 0.0;
  cfg.alpha = 0.05;
  const auto p = gen_problem(cfg);
  const auto g = make_network(TopologySpec::ring(), 1);
  Matrix x0(5, 1);
  x0 << 1, -2, 0.5, 3, 0;
  auto state = pg_extra_init(p, x0);
  Vector gd = x0.col(0);
  for (int k = 0; k < 50; ++k) {
    state = pg_extra_step(state, p, g);
    gd = gd - p.alpha * p.a[0].transpose() * (p.a[0] * gd - p.b[0]);
    check_close(state.x.col(0), gd, 1e-12);
    CHECK(state.w.norm() == 0.0);
  }
  CHECK(state.k == 50);
}

TEST_CASE("consensus least-squares point is a fixed point") {
  ProblemConfig cfg;
  cfg.seed = 5;
  cfg.d = 5;
  cfg.lambda = 0.0;
  const auto p = gen_problem(cfg);
  const auto g = make_network(TopologySpec::ring(), p.n_agents());
  const Vector xbar = stacked_a(p).colPivHouseholderQr().solve(stacked_b(p));
  PgExtraState s = pg_extra_init(p, xbar.replicate(1, p.n_agents()));
  for (int i = 0; i < p.n_agents(); ++i) s.w.col(i) = -p.alpha * p.a[i].transpose() * (p.a[i] * xbar - p.b[i]);
  const auto next = pg_extra_step(s, p, g);
  CHECK((next.x - s.x).norm() <= 1e-10);
  CHECK((next.w - s.w).norm() <= 1e-10);
}

TEST_CASE("a large threshold collapses the iterates to zero") {
  auto p = gen_problem(ProblemConfig::desk_scale(2));
  double sup = 0;
  for (int i = 0; i < p.n_agents(); ++i) sup = std::max(sup, (p.a[i].transpose() * p.b[i]).cwiseAbs().maxCoeff());
  p.lambda = 2.0 * sup;
  const auto g = make_network(TopologySpec::ring(), p.n_agents());
  auto s = pg_extra_init(p);
  for (int k = 0; k < 20; ++k) {
    s = pg_extra_step(s, p, g);
    CHECK(s.x.norm() == 0.0);
  }
}

TEST_CASE("fixed-point map wraps the step") {
  const auto p = gen_problem(ProblemConfig::desk_scale(1));
  const auto g = make_network(TopologySpec::ring(), p.n_agents());
  const auto map = as_fixed_point_operator(p, g);
  CHECK(map.size() == static_cast<std::size_t>(2 * p.d * p.n_agents()));
  CHECK(p.alpha < map.step_bound());

  std::mt19937_64 rng(3);
  Vector z = random_state(map, rng);
  auto s = map.unpack(z);
  for (int k = 0; k < 30; ++k) {
    z = map.apply(z);
    s = pg_extra_step(s, p, g);
    CHECK(z == map.pack(s));
  }

  auto big = p;
  big.alpha = 10.0;
  try {
    as_fixed_point_operator(big, g);
    FAIL("expected StepSizeTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepSizeTooLarge);
  }
}

TEST_CASE("the map is nonexpansive in the M metric") {
  const auto p = gen_problem(ProblemConfig::desk_scale(4));
  const auto g = make_network(TopologySpec::erdos_renyi(0.5, 9), p.n_agents());
  const auto map = as_fixed_point_operator(p, g);
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector z = random_state(map, rng), zp = random_state(map, rng);
    const double before = map.m_norm_sq(z - zp);
    CHECK(before > 0.0);
    CHECK(std::sqrt(map.m_norm_sq(map.apply(z) - map.apply(zp))) <= std::sqrt(before) * (1 + 1e-8));
  }
}

TEST_CASE("anchored PG-EXTRA runs") {
  const auto p = gen_problem(ProblemConfig::desk_scale(1));
  const auto g = make_network(TopologySpec::ring(), p.n_agents());
  const auto map = as_fixed_point_operator(p, g);
  const int K = 2000;

  const auto vanilla = run_anchored_pgextra(map, AnchorSchedule::none(), K);
  REQUIRE(vanilla.k.size() == static_cast<std::size_t>(K));
  for (std::size_t j = 1; j < vanilla.resid_sq_m.size(); ++j) {
    CHECK(vanilla.resid_sq_m[j] <= vanilla.resid_sq_m[j - 1] * (1 + 1e-10));
  }

  // beta = 0 is plain iteration of the map.
  Vector z = map.pack(pg_extra_init(p));
  for (int k = 0; k < 50; ++k) {
    const Vector tz = map.apply(z);
    CHECK(vanilla.resid_sq_euclid[k] == (z - tz).squaredNorm());
    z = tz;
  }
  const auto halpern_none = run_anchored_pgextra(map, AnchorSchedule::none(), 50, AnchorComposition::HalpernOnMap);
  CHECK(halpern_none.final_state == z);

  const auto again = run_anchored_pgextra(map, AnchorSchedule::none(), K);
  CHECK(again.resid_sq_m == vanilla.resid_sq_m);

  for (auto composition : {AnchorComposition::ResolventForm, AnchorComposition::HalpernOnMap}) {
    const auto adaptive = run_anchored_pgextra(map, AnchorSchedule::adaptive(), K, composition);
    for (std::size_t j = 0; j < adaptive.beta.size(); ++j) {
      CHECK(adaptive.beta[j] >= 0.0);
      CHECK(adaptive.beta[j] <= (1 + 1e-10) / (adaptive.k[j] + 1.0));
    }
    const auto power = run_anchored_pgextra(map, AnchorSchedule::power_law(2.0, 1.5), 10, composition);
    CHECK(power.beta[0] == doctest::Approx(2.0 / 3.0));
    CHECK(power.beta[3] == doctest::Approx(2.0 / 10.0));
  }
  CHECK_THROWS_AS(run_anchored_pgextra(map, AnchorSchedule::strongly_monotone(1.0), 5), Error);
  CHECK_THROWS_AS(run_anchored_pgextra(map, AnchorSchedule::none(), 0), Error);
}

TEST_CASE("vanilla PG-EXTRA reaches consensus") {
  const auto p = gen_problem(ProblemConfig::desk_scale(1));
  const auto g = make_network(TopologySpec::ring(), p.n_agents());
  auto s = pg_extra_init(p);
  for (int k = 0; k < 10000; ++k) s = pg_extra_step(s, p, g);
  CHECK(consensus_error(s.x) <= 1e-3);
  CHECK(consensus_error(Matrix::Ones(3, 4)) == 0.0);
}
