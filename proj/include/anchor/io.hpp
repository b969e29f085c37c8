#pragma once

#include "anchor/distributed.hpp"
#include "anchor/dynamics.hpp"
#include "anchor/operators.hpp"
#include "anchor/schedules.hpp"
#include "anchor/solvers.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace anchor {

// Plain-text configuration record: one `key = value` per line, `#` starts a
// comment. Values are JSON literals (numbers, arrays such as [[0,1],[-1,0]],
// quoted strings); anything that is not valid JSON is kept as a bare string.
class ConfigRecord {
 public:
  static ConfigRecord parse(std::istream& in, const std::string& source = "<config>");
  static ConfigRecord parse_string(const std::string& text);
  static ConfigRecord load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, nlohmann::json value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  Vector get_vector(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;

  const std::map<std::string, nlohmann::json>& values() const { return values_; }

 private:
  [[noreturn]] void field_error(const std::string& key, const std::string& what) const;
  const nlohmann::json& at(const std::string& key) const;

  std::string source_;
  std::map<std::string, nlohmann::json> values_;
  std::map<std::string, int> lines_;
};

/// Keys: op = rotation | rotation_family | scaled_identity | affine | zero | l1,
/// with op.scale, op.xi, op.mu, op.dim, op.M, op.q, op.weight as applicable.
Operator operator_from_config(const ConfigRecord& config);

/// Keys: schedule = power_law | strongly_monotone | adaptive | none, with
/// gamma, p, mu, clamp_delta.
AnchorSchedule schedule_from_config(const ConfigRecord& config);

/// Columns t, x_0..x_{d-1}, resid_sq, beta.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Columns k, resid_sq, beta and optionally x_0..x_{d-1}.
void write_iterate_csv(std::ostream& out, const IterateLog& log, bool with_iterates = false);
/// Columns k, resid_sq_euclid, resid_sq_M, beta.
void write_pgextra_csv(std::ostream& out, const ResidualSeries& series);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(std::istream& in);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal log-log line plot; nonpositive points are skipped.
void write_loglog_svg(std::ostream& out, const std::string& title, const std::vector<SvgSeries>& series,
                      const std::string& x_label = "k", const std::string& y_label = "squared residual");

}  // namespace anchor
