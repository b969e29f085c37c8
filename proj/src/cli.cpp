#include "anchor/cli.hpp"

#include "anchor/diagnostics.hpp"
#include "anchor/distributed.hpp"
#include "anchor/dynamics.hpp"
#include "anchor/error.hpp"
#include "anchor/io.hpp"
#include "anchor/operators.hpp"
#include "anchor/schedules.hpp"
#include "anchor/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace anchor {
namespace {

using json = nlohmann::json;

// Flags bound to configuration keys. A flag that was given on the command
// line overrides the same key from --config.
class KeyedOptions {
 public:
  explicit KeyedOptions(CLI::App* app) : app_(app) {}

  void add(const std::string& flag, const std::string& key, const std::string& help) {
    CLI::Option* opt = app_->add_option(flag, values_[key], help);
    bound_.emplace_back(key, opt);
  }

  void apply(ConfigRecord& config) const {
    for (const auto& [key, opt] : bound_) {
      if (opt->count() == 0) continue;
      const std::string& raw = values_.at(key);
      json value = json::parse(raw, nullptr, false);
      if (value.is_discarded()) value = raw;
      config.set(key, std::move(value));
    }
  }

 private:
  CLI::App* app_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> bound_;
};

struct CommonOutputs {
  std::string config_path;
  std::string csv;
  std::string summary;
  std::string svg;
  bool with_iterates = false;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<KeyedOptions> keys;
  CommonOutputs outputs;
};

void add_operator_keys(KeyedOptions& k) {
  k.add("--op", "op", "rotation | rotation_family | scaled_identity | affine | zero | l1");
  k.add("--scale", "op.scale", "rotation scale");
  k.add("--xi", "op.xi", "rotation family parameter");
  k.add("--op-mu", "op.mu", "scaled identity modulus");
  k.add("--dim", "op.dim", "dimension for scaled_identity, zero, l1");
  k.add("--weight", "op.weight", "l1 weight");
  k.add("--matrix", "op.M", "affine matrix as nested list, e.g. [[0,1],[-1,0]]");
  k.add("--offset", "op.q", "affine offset as list");
  k.add("--x0", "x0", "initial point as list (default e_1)");
}

void add_schedule_keys(KeyedOptions& k) {
  k.add("--schedule", "schedule", "power_law | strongly_monotone | adaptive | none");
  k.add("--gamma", "gamma", "power-law gamma");
  k.add("--p", "p", "power-law exponent");
  k.add("--mu", "mu", "strongly monotone modulus");
  k.add("--clamp-delta", "clamp_delta", "clamp for beta near t = 0");
}

Command& make_command(CLI::App& app, std::vector<std::unique_ptr<Command>>& commands, const std::string& name,
                      const std::string& help) {
  auto cmd = std::make_unique<Command>();
  cmd->app = app.add_subcommand(name, help);
  cmd->app->set_help_flag("--help", "print this help message and exit");
  cmd->keys = std::make_unique<KeyedOptions>(cmd->app);
  cmd->app->add_option("--config", cmd->outputs.config_path, "key = value configuration file");
  cmd->app->add_option("--out", cmd->outputs.csv, "CSV output path");
  cmd->app->add_option("--summary", cmd->outputs.summary, "JSON summary output path");
  cmd->app->add_option("--svg", cmd->outputs.svg, "log-log SVG plot path");
  commands.push_back(std::move(cmd));
  return *commands.back();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ConfigParseError, "cannot write " + path);
  return out;
}

Vector initial_point(const ConfigRecord& c, int dim) {
  if (c.has("x0")) {
    Vector x0 = c.get_vector("x0");
    if (x0.size() != dim) {
      fail(ErrorCode::ConfigParseError,
           "field 'x0' has " + std::to_string(x0.size()) + " entries, operator dimension is " + std::to_string(dim));
    }
    return x0;
  }
  Vector x0 = Vector::Zero(dim);
  x0[0] = 1.0;
  return x0;
}

int positive_int(const ConfigRecord& c, const std::string& key, long long fallback) {
  const long long v = c.get_int(key, fallback);
  if (v <= 0 || v > 1'000'000'000) fail(ErrorCode::ConfigParseError, "field '" + key + "' must be a positive integer");
  return static_cast<int>(v);
}

double positive_double(const ConfigRecord& c, const std::string& key, double fallback) {
  const double v = c.get_double(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::ConfigParseError, "field '" + key + "' must be positive");
  return v;
}

void put_fit(json& summary, const RateFit& fit) {
  summary["slope"] = fit.slope;
  summary["r_squared"] = fit.r_squared;
  summary["fit_window"] = {fit.window_lo, fit.window_hi};
  summary["fit_samples"] = fit.samples;
  summary["zero_samples"] = fit.zero_samples;
  summary["exact_convergence"] = fit.exact_convergence;
}

void put_fit_or_note(json& summary, const std::function<RateFit()>& fit) {
  try {
    put_fit(summary, fit());
  } catch (const Error& e) {
    summary["slope"] = nullptr;
    summary["r_squared"] = nullptr;
    summary["fit_note"] = e.what();
  }
}

std::vector<double> as_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

void write_svg_if_requested(const CommonOutputs& o, const std::string& title, const std::vector<SvgSeries>& series,
                            const std::string& x_label, const std::string& y_label) {
  if (o.svg.empty()) return;
  auto out = open_output(o.svg);
  write_loglog_svg(out, title, series, x_label, y_label);
}

std::optional<Vector> solution_of(const Operator& op) { return zero_point(op); }

// ---------------------------------------------------------------- simulate

json cmd_simulate(const ConfigRecord& c, const CommonOutputs& o) {
  const Operator op = operator_from_config(c);
  const AnchorSchedule s = schedule_from_config(c);
  const Vector x0 = initial_point(c, op.dim());
  const double t_max = positive_double(c, "t_max", 10.0);
  const int steps = positive_int(c, "steps", 10000);
  IntegrationOptions opts;
  opts.record_every = positive_int(c, "record_every", 1);
  if (c.has("yosida") || !op.lipschitz()) opts.yosida_lambda = positive_double(c, "yosida", 1e-2);

  auto integrate = [&]() {
    if (s.family() == ScheduleFamily::Adaptive) {
      require(op.lipschitz().has_value(), "adaptive flow needs a Lipschitz operator");
      return integrate_adaptive_ode(op, x0, t_max, steps, opts.record_every);
    }
    return integrate_anchor_ode(op, s, x0, t_max, steps, opts);
  };

  std::optional<Trajectory> traj;
  try {
    traj.emplace(integrate());
  } catch (const NonFiniteStateError& e) {
    if (!o.csv.empty()) {
      auto out = open_output(o.csv);
      write_trajectory_csv(out, e.prefix());
    }
    throw;
  }
  if (!o.csv.empty()) {
    auto out = open_output(o.csv);
    write_trajectory_csv(out, *traj);
  }

  json summary;
  summary["command"] = "simulate";
  summary["method"] = s.family() == ScheduleFamily::Adaptive ? "adaptive_ode" : "anchor_ode_rk4";
  summary["operator"] = op.name();
  summary["schedule"] = s.name();
  summary["t_max"] = t_max;
  summary["steps"] = steps;
  summary["final_resid_sq"] = traj->residuals().back().squaredNorm();
  put_fit_or_note(summary, [&] { return fit_rate(*traj, t_max / 100.0, t_max); });

  json bounds = json::object();
  if (const auto x_star = solution_of(op)) {
    if (s.family() == ScheduleFamily::PowerLaw) {
      const auto report = check_residual_bound_monotone(*traj, s, *x_star, std::min(1.0, t_max / 10.0));
      if (report.exact) bounds["residual_bound_4_over_t2"] = report.holds;
      summary["bound_ratio_max"] = report.max_ratio;
    } else if (s.family() == ScheduleFamily::StronglyMonotone && op.mu() >= s.mu() - 1e-12) {
      bounds["residual_bound_strong"] = check_residual_bound_strong(*traj, s.mu(), *x_star);
    }
  }
  summary["bounds_ok"] = bounds;

  std::vector<double> rsq;
  for (const auto& r : traj->residuals()) rsq.push_back(r.squaredNorm());
  write_svg_if_requested(o, "anchor flow: " + s.name(), {{s.name(), traj->times(), rsq}}, "t", "squared residual");
  return summary;
}

// ------------------------------------------------------------------- solve

json cmd_solve(const ConfigRecord& c, const CommonOutputs& o) {
  const Operator op = operator_from_config(c);
  const Vector x0 = initial_point(c, op.dim());
  const std::string method = c.get_string("method", "appm");
  SolverConfig cfg;
  cfg.max_iter = positive_int(c, "iters", 1000);
  cfg.h = positive_double(c, "h", 1.0);
  cfg.record_every = positive_int(c, "record_every", 1);

  json summary;
  summary["command"] = "solve";
  summary["method"] = method;
  summary["operator"] = op.name();
  json bounds = json::object();
  const auto x_star = solution_of(op);

  IterateLog log;
  if (method == "appm") {
    log = run_appm(op, x0, cfg);
    summary["schedule"] = AnchorSchedule::power_law(1.0, 1.0).name();
    if (x_star) bounds["appm_bound"] = check_appm_bound(log, *x_star).holds;
  } else if (method == "generalized") {
    ConfigRecord pc = c;
    pc.set("schedule", "power_law");
    const AnchorSchedule s = schedule_from_config(pc);
    log = run_generalized_anchor(op, s.gamma(), s.p(), x0, cfg);
    summary["schedule"] = s.name();
    if (x_star && s.is_harmonic() && std::abs(s.gamma() - 1.0) < 1e-12) {
      bounds["appm_bound"] = check_appm_bound(log, *x_star).holds;
    }
  } else if (method == "halpern") {
    log = run_halpern(op, [](int k) { return 1.0 / (k + 2.0); }, x0, cfg);
    summary["schedule"] = "halpern(1/(k+2))";
    if (x_star) bounds["appm_bound"] = check_appm_bound(log, *x_star).holds;
  } else if (method == "osppm") {
    const double mu = c.get_double("mu", op.mu());
    if (!(mu >= 0.0) || !std::isfinite(mu)) fail(ErrorCode::ConfigParseError, "field 'mu' must be nonnegative");
    log = run_osppm(op, mu, x0, cfg);
    summary["schedule"] = "osppm(mu=" + std::to_string(mu) + ")";
  } else if (method == "adaptive") {
    log = run_adaptive(op, x0, cfg);
    summary["schedule"] = "adaptive";
    if (x_star) {
      const auto report = check_adaptive_invariants(log, *x_star);
      bounds["beta_first_half"] = report.beta_first_half;
      bounds["beta_in_range"] = report.beta_in_range;
      bounds["beta_harmonic"] = report.beta_harmonic;
      bounds["phi_nonpositive"] = report.phi_nonpositive;
      bounds["residual_bound"] = report.residual_bound;
    }
  } else {
    fail(ErrorCode::ConfigParseError, "unknown method '" + method + "'");
  }

  if (!o.csv.empty()) {
    auto out = open_output(o.csv);
    write_iterate_csv(out, log, o.with_iterates);
  }
  summary["iters"] = cfg.max_iter;
  summary["h"] = cfg.h;
  summary["final_resid_sq"] = log.residuals.back().squaredNorm();
  const double k_max = log.ks.back();
  const double lo = c.get_double("fit_lo", std::max(1.0, k_max / 100.0));
  const double hi = c.get_double("fit_hi", k_max);
  put_fit_or_note(summary, [&] { return fit_rate(log, lo, hi); });
  summary["bounds_ok"] = bounds;
  write_svg_if_requested(o, method + " on " + op.name(), {{method, as_doubles(log.ks), log.residual_sq()}}, "k",
                         "squared residual");
  return summary;
}

// ------------------------------------------------------------------- rates

json cmd_rates(const ConfigRecord& c, const CommonOutputs& o) {
  const Operator op = operator_from_config(c);
  const Vector x0 = initial_point(c, op.dim());
  SolverConfig cfg;
  cfg.max_iter = positive_int(c, "iters", 100000);
  cfg.h = positive_double(c, "h", 1.0);
  const double lo = c.get_double("fit_lo", 1e3);
  const double hi = c.get_double("fit_hi", cfg.max_iter);
  const int jobs = positive_int(c, "jobs", 1);

  std::vector<std::pair<double, double>> pairs = {{1, 1}, {1, 2}, {1, 0.5}, {0.5, 1}, {1.5, 1}};
  if (c.has("pairs")) {
    const Matrix m = c.get_matrix("pairs");
    if (m.cols() != 2) fail(ErrorCode::ConfigParseError, "field 'pairs' must hold [p, gamma] rows");
    pairs.clear();
    for (Eigen::Index i = 0; i < m.rows(); ++i) pairs.emplace_back(m(i, 0), m(i, 1));
  }
  for (const auto& [p, g] : pairs) AnchorSchedule::power_law(g, p);  // validation only

  struct Row {
    IterateLog log;
    RateFit fit;
  };
  auto run_one = [&](std::size_t i) {
    Row row;
    row.log = run_generalized_anchor(op, pairs[i].second, pairs[i].first, x0, cfg);
    row.fit = fit_rate(row.log, lo, hi);
    return row;
  };
  std::vector<Row> rows(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(jobs)) {
    std::vector<std::future<Row>> batch;
    for (std::size_t i = start; i < std::min(pairs.size(), start + jobs); ++i) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_one, i));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) rows[start + i] = batch[i].get();
  }

  const bool worst_case_op = op.kind() == OperatorKind::Rotation2D;
  json summary;
  summary["command"] = "rates";
  summary["method"] = "generalized";
  summary["schedule"] = "power_law";
  summary["operator"] = op.name();
  summary["iters"] = cfg.max_iter;
  json table = json::array();
  json bounds = json::object();
  std::vector<SvgSeries> series;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [p, g] = pairs[i];
    json entry;
    entry["p"] = p;
    entry["gamma"] = g;
    put_fit(entry, rows[i].fit);
    const RateExpectation expected = expected_generalized_slope(g, p);
    entry["expected"] = expected.flat ? json("flat") : json(expected.slope);
    if (worst_case_op) {
      std::ostringstream name;
      name << "slope_p" << p << "_gamma" << g;
      bounds[name.str()] = slope_matches(expected, rows[i].fit.slope);
    }
    table.push_back(entry);
    std::ostringstream label;
    label << "p=" << p << " gamma=" << g;
    series.push_back({label.str(), as_doubles(rows[i].log.ks), rows[i].log.residual_sq()});
  }
  summary["rates"] = table;
  summary["slope"] = rows.empty() ? json(nullptr) : json(rows.front().fit.slope);
  summary["r_squared"] = rows.empty() ? json(nullptr) : json(rows.front().fit.r_squared);
  summary["bounds_ok"] = bounds;

  if (!o.csv.empty()) {
    auto out = open_output(o.csv);
    out << "p,gamma,slope,r_squared,samples,zero_samples\n";
    out.precision(17);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& f = rows[i].fit;
      out << pairs[i].first << ',' << pairs[i].second << ',' << f.slope << ',' << f.r_squared << ',' << f.samples
          << ',' << f.zero_samples << '\n';
    }
  }
  write_svg_if_requested(o, "generalized anchor rates on " + op.name(), series, "k", "squared residual");
  return summary;
}

// --------------------------------------------------------------- worstcase

TightnessWeight weight_from(const std::string& name) {
  if (name == "quadratic") return TightnessWeight::Quadratic;
  if (name == "two_gamma") return TightnessWeight::TwoGamma;
  if (name == "two_p") return TightnessWeight::TwoP;
  if (name == "one") return TightnessWeight::One;
  fail(ErrorCode::ConfigParseError, "unknown weight '" + name + "' (quadratic | two_gamma | two_p | one)");
}

json cmd_worstcase(const ConfigRecord& c, const CommonOutputs& o) {
  const Operator op = operator_from_config(c);
  if (!op.is_linear() || op.offset().norm() != 0.0) {
    fail(ErrorCode::ConfigParseError, "worstcase needs a linear operator without offset");
  }
  const AnchorSchedule s = schedule_from_config(c);
  const Vector x0 = initial_point(c, op.dim());
  const double t_max = positive_double(c, "t_max", 100.0);
  const int points = positive_int(c, "points", 200);
  const std::string weight_name = c.get_string("weight_kind", "quadratic");
  const TightnessWeight weight = weight_from(weight_name);

  std::vector<double> grid;
  const double t_min = std::min(1.0, t_max);
  for (int i = 0; i < points; ++i) {
    const double u = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    grid.push_back(t_min * std::pow(t_max / t_min, u));
  }
  const TightnessEstimate est = worstcase_nonvanishing(op.matrix(), s, x0, weight, grid);

  if (!o.csv.empty()) {
    auto out = open_output(o.csv);
    out << "t,weighted\n";
    out.precision(17);
    for (std::size_t i = 0; i < est.times.size(); ++i) out << est.times[i] << ',' << est.weighted[i] << '\n';
  }
  json summary;
  summary["command"] = "worstcase";
  summary["method"] = "closed_form";
  summary["operator"] = op.name();
  summary["schedule"] = s.name();
  summary["weight"] = weight_name;
  summary["last_decade_max"] = est.last_decade_max;
  summary["final_weighted"] = est.weighted.back();
  summary["slope"] = nullptr;
  summary["r_squared"] = nullptr;
  summary["bounds_ok"] = json::object();
  write_svg_if_requested(o, "weighted residual, " + s.name(), {{weight_name, est.times, est.weighted}}, "t",
                         "weighted squared residual");
  return summary;
}

// -------------------------------------------------------------- limitcheck

json cmd_limitcheck(const ConfigRecord& c, const CommonOutputs& o) {
  const Operator op = operator_from_config(c);
  const Vector x0 = initial_point(c, op.dim());
  const double horizon = positive_double(c, "horizon", 10.0);
  std::vector<double> hs = {0.1, 0.05, 0.025, 0.0125};
  if (c.has("h_list")) {
    const Vector v = c.get_vector("h_list");
    hs.assign(v.data(), v.data() + v.size());
  }
  const auto rows = continuous_limit_check(op, x0, horizon, hs);

  if (!o.csv.empty()) {
    auto out = open_output(o.csv);
    out << "h,iterations,max_deviation\n";
    out.precision(17);
    for (const auto& r : rows) out << r.h << ',' << r.iterations << ',' << r.max_deviation << '\n';
  }
  json summary;
  summary["command"] = "limitcheck";
  summary["method"] = "appm";
  summary["operator"] = op.name();
  summary["schedule"] = AnchorSchedule::power_law(1.0, 1.0).name();
  json table = json::array();
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    table.push_back({{"h", r.h}, {"iterations", r.iterations}, {"max_deviation", r.max_deviation}});
    xs.push_back(r.h);
    ys.push_back(r.max_deviation);
  }
  summary["rows"] = table;
  std::vector<double> log_h, log_dev;
  bool fit_possible = rows.size() >= 2;
  for (const auto& r : rows) {
    if (!(r.max_deviation > 0.0)) fit_possible = false;
  }
  if (fit_possible) {
    // Empirical order of convergence in h.
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const long double n = rows.size();
    for (const auto& r : rows) {
      const long double lx = std::log(r.h), ly = std::log(r.max_deviation);
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    summary["slope"] = static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
  } else {
    summary["slope"] = nullptr;
  }
  summary["r_squared"] = nullptr;
  summary["bounds_ok"] = {{"deviations_shrink", deviations_shrink(rows)}};
  write_svg_if_requested(o, "APPM(h) against the continuous flow", {{"max deviation", xs, ys}}, "h",
                         "max deviation");
  return summary;
}

// ----------------------------------------------------------------- pgextra

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  const std::string ext = p.has_extension() ? p.extension().string() : std::string(".csv");
  return (p.parent_path() / (p.stem().string() + "_" + suffix + ext)).string();
}

json cmd_pgextra(const ConfigRecord& c, const CommonOutputs& o) {
  const std::string scale = c.get_string("scale", "desk");
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
  ProblemConfig pc;
  if (scale == "desk") {
    pc = ProblemConfig::desk_scale(seed);
  } else if (scale == "full") {
    pc = ProblemConfig::full_scale(seed);
  } else {
    fail(ErrorCode::ConfigParseError, "field 'scale' must be desk or full");
  }
  pc.d = positive_int(c, "d", pc.d);
  pc.n_agents = positive_int(c, "agents", pc.n_agents);
  pc.m_per_agent = positive_int(c, "m_per_agent", pc.m_per_agent);
  pc.noise_sigma = c.get_double("noise", pc.noise_sigma);
  pc.sparsity = c.get_double("sparsity", pc.sparsity);
  pc.lambda = c.get_double("lambda", pc.lambda);
  pc.alpha = positive_double(c, "alpha", pc.alpha);

  const std::string topology = c.get_string("topology", "ring");
  TopologySpec spec;
  if (topology == "ring") {
    spec = TopologySpec::ring();
  } else if (topology == "path") {
    spec = TopologySpec::path();
  } else if (topology == "er") {
    spec = TopologySpec::erdos_renyi(c.get_double("edge_prob", 0.5), seed);
  } else {
    fail(ErrorCode::ConfigParseError, "field 'topology' must be ring, path or er");
  }

  const int iters = positive_int(c, "iters", 2000);
  const std::string comp_name = c.get_string("composition", "resolvent");
  AnchorComposition composition = AnchorComposition::ResolventForm;
  if (comp_name == "halpern") {
    composition = AnchorComposition::HalpernOnMap;
  } else if (comp_name != "resolvent") {
    fail(ErrorCode::ConfigParseError, "field 'composition' must be resolvent or halpern");
  }
  const AnchorSchedule anchored = AnchorSchedule::power_law(c.get_double("gamma", 2.0), c.get_double("p", 1.5));

  const SensingProblem problem = gen_problem(pc);
  const NetworkGraph graph = make_network(spec, pc.n_agents);
  const PgExtraMap map = as_fixed_point_operator(problem, graph);

  const ResidualSeries vanilla = run_anchored_pgextra(map, AnchorSchedule::none(), iters, composition);
  const ResidualSeries anchor = run_anchored_pgextra(map, anchored, iters, composition);
  const ResidualSeries adaptive = run_anchored_pgextra(map, AnchorSchedule::adaptive(), iters, composition);

  if (!o.csv.empty()) {
    for (const auto& [name, series] : {std::pair<std::string, const ResidualSeries*>{"vanilla", &vanilla},
                                       {"anchored", &anchor},
                                       {"adaptive", &adaptive}}) {
      auto out = open_output(with_suffix(o.csv, name));
      write_pgextra_csv(out, *series);
    }
  }

  bool nonincreasing = true;
  for (std::size_t i = 1; i < vanilla.resid_sq_m.size(); ++i) {
    if (vanilla.resid_sq_m[i] > vanilla.resid_sq_m[i - 1] * (1.0 + 1e-10) + 1e-30) nonincreasing = false;
  }
  json summary;
  summary["command"] = "pgextra";
  summary["method"] = "pg_extra";
  summary["schedule"] = anchored.name();
  summary["composition"] = comp_name;
  summary["seed"] = seed;
  summary["iters"] = iters;
  summary["step_bound"] = map.step_bound();
  summary["final_resid_sq_m"] = {
      {"vanilla", vanilla.resid_sq_m.back()}, {"anchored", anchor.resid_sq_m.back()}, {"adaptive", adaptive.resid_sq_m.back()}};
  const Matrix x_final = map.unpack(vanilla.final_state).x;
  summary["vanilla_consensus_error"] = consensus_error(x_final);
  put_fit_or_note(summary, [&] {
    std::vector<double> ks(anchor.k.begin(), anchor.k.end());
    return fit_rate(ks, anchor.resid_sq_m, std::max(1.0, iters / 100.0), iters);
  });
  summary["bounds_ok"] = {
      {"vanilla_m_residual_nonincreasing", nonincreasing},
      {"anchored_le_vanilla", anchor.resid_sq_m.back() <= vanilla.resid_sq_m.back()},
      {"adaptive_le_vanilla", adaptive.resid_sq_m.back() <= vanilla.resid_sq_m.back()},
  };
  auto to_series = [](const std::string& label, const ResidualSeries& s) {
    return SvgSeries{label, std::vector<double>(s.k.begin(), s.k.end()), s.resid_sq_m};
  };
  write_svg_if_requested(o, "PG-EXTRA fixed-point residual",
                         {to_series("vanilla", vanilla), to_series(anchored.name(), anchor),
                          to_series("adaptive", adaptive)},
                         "k", "squared M-norm residual");
  return summary;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ConfigParseError:
    case ErrorCode::StepSizeTooLarge:
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::AdaptiveNeedsState:
    case ErrorCode::UnsupportedScheduleForExactBound:
      return kExitConfig;
    case ErrorCode::InvariantViolation:
    case ErrorCode::NonpositiveDenominator:
      return kExitInvariant;
    default:
      return kExitNumeric;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchor acceleration experiments: flows, anchored resolvent methods, rates and PG-EXTRA."};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  std::map<CLI::App*, std::function<json(const ConfigRecord&, const CommonOutputs&)>> handlers;

  {
    auto& cmd = make_command(app, commands, "simulate", "integrate the anchor ODE");
    add_operator_keys(*cmd.keys);
    add_schedule_keys(*cmd.keys);
    cmd.keys->add("--t-max", "t_max", "final time");
    cmd.keys->add("--steps", "steps", "RK4 steps");
    cmd.keys->add("--record-every", "record_every", "store every n-th step");
    cmd.keys->add("--yosida", "yosida", "Yosida parameter for non-Lipschitz operators");
    handlers[cmd.app] = cmd_simulate;
  }
  {
    auto& cmd = make_command(app, commands, "solve", "run an anchored resolvent method");
    add_operator_keys(*cmd.keys);
    cmd.keys->add("--method", "method", "appm | generalized | halpern | osppm | adaptive");
    cmd.keys->add("--gamma", "gamma", "generalized method gamma");
    cmd.keys->add("--p", "p", "generalized method exponent");
    cmd.keys->add("--mu", "mu", "OS-PPM modulus (default: operator modulus)");
    cmd.keys->add("--h", "h", "resolvent step");
    cmd.keys->add("--iters", "iters", "iterations");
    cmd.keys->add("--record-every", "record_every", "log every n-th iterate");
    cmd.keys->add("--fit-lo", "fit_lo", "rate fit window start");
    cmd.keys->add("--fit-hi", "fit_hi", "rate fit window end");
    cmd.app->add_flag("--with-iterates", cmd.outputs.with_iterates, "add iterate coordinates to the CSV");
    handlers[cmd.app] = cmd_solve;
  }
  {
    auto& cmd = make_command(app, commands, "rates", "rate table of the generalized anchored method");
    add_operator_keys(*cmd.keys);
    cmd.keys->add("--pairs", "pairs", "list of [p, gamma] pairs");
    cmd.keys->add("--iters", "iters", "iterations per pair");
    cmd.keys->add("--h", "h", "resolvent step");
    cmd.keys->add("--fit-lo", "fit_lo", "rate fit window start");
    cmd.keys->add("--fit-hi", "fit_hi", "rate fit window end");
    cmd.keys->add("--jobs", "jobs", "pairs run concurrently");
    handlers[cmd.app] = cmd_rates;
  }
  {
    auto& cmd = make_command(app, commands, "worstcase", "weighted residual along the closed-form flow");
    add_operator_keys(*cmd.keys);
    add_schedule_keys(*cmd.keys);
    cmd.keys->add("--t-max", "t_max", "last grid time");
    cmd.keys->add("--points", "points", "geometric grid size");
    cmd.keys->add("--weight-kind", "weight_kind", "quadratic | two_gamma | two_p | one");
    handlers[cmd.app] = cmd_worstcase;
  }
  {
    auto& cmd = make_command(app, commands, "limitcheck", "APPM(h) against the continuous flow as h shrinks");
    add_operator_keys(*cmd.keys);
    cmd.keys->add("--horizon", "horizon", "time horizon T");
    cmd.keys->add("--h-list", "h_list", "list of step sizes");
    handlers[cmd.app] = cmd_limitcheck;
  }
  {
    auto& cmd = make_command(app, commands, "pgextra", "vanilla, anchored and adaptive PG-EXTRA");
    cmd.keys->add("--seed", "seed", "problem seed");
    cmd.keys->add("--scale", "scale", "desk | full");
    cmd.keys->add("--d", "d", "signal dimension");
    cmd.keys->add("--agents", "agents", "number of agents");
    cmd.keys->add("--m", "m_per_agent", "measurements per agent");
    cmd.keys->add("--noise", "noise", "noise standard deviation");
    cmd.keys->add("--sparsity", "sparsity", "fraction of nonzeros");
    cmd.keys->add("--lambda", "lambda", "l1 weight");
    cmd.keys->add("--alpha", "alpha", "PG-EXTRA step");
    cmd.keys->add("--topology", "topology", "ring | path | er");
    cmd.keys->add("--edge-prob", "edge_prob", "Erdos-Renyi edge probability");
    cmd.keys->add("--iters", "iters", "iterations K");
    cmd.keys->add("--gamma", "gamma", "anchored variant gamma");
    cmd.keys->add("--p", "p", "anchored variant exponent");
    cmd.keys->add("--composition", "composition", "resolvent | halpern");
    handlers[cmd.app] = cmd_pgextra;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      ConfigRecord config = cmd->outputs.config_path.empty() ? ConfigRecord{}
                                                             : ConfigRecord::load(cmd->outputs.config_path);
      cmd->keys->apply(config);
      json summary = handlers.at(cmd->app)(config, cmd->outputs);
      const std::string text = summary.dump(2);
      out << text << '\n';
      if (!cmd->outputs.summary.empty()) {
        auto file = open_output(cmd->outputs.summary);
        file << text << '\n';
      }
      bool all_ok = true;
      for (const auto& [name, ok] : summary["bounds_ok"].items()) {
        if (!ok.get<bool>()) {
          err << "check failed: " << name << '\n';
          all_ok = false;
        }
      }
      return all_ok ? kExitOk : kExitInvariant;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "error [ConfigParseError]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace anchor
