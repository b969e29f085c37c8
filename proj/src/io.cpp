#include "anchor/io.hpp"

#include "anchor/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace anchor {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ConfigRecord ConfigRecord::parse(std::istream& in, const std::string& source) {
  ConfigRecord rec;
  rec.source_ = source;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigParseError, source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) {
      fail(ErrorCode::ConfigParseError, source + ":" + std::to_string(number) + ": empty key or value");
    }
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
      if (raw.front() == '[' || raw.front() == '{' || raw.front() == '"') {
        fail(ErrorCode::ConfigParseError,
             source + ":" + std::to_string(number) + ": malformed value for '" + key + "'");
      }
      value = raw;
    }
    rec.values_[key] = std::move(value);
    rec.lines_[key] = number;
  }
  return rec;
}

ConfigRecord ConfigRecord::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

ConfigRecord ConfigRecord::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigParseError, "cannot open config file " + path);
  return parse(in, path);
}

void ConfigRecord::set(const std::string& key, nlohmann::json value) {
  values_[key] = std::move(value);
  lines_.erase(key);
}

void ConfigRecord::field_error(const std::string& key, const std::string& what) const {
  std::string where = source_;
  if (auto it = lines_.find(key); it != lines_.end()) where += ":" + std::to_string(it->second);
  fail(ErrorCode::ConfigParseError, where + ": field '" + key + "' " + what);
}

const nlohmann::json& ConfigRecord::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) field_error(key, "is required");
  return it->second;
}

std::string ConfigRecord::get_string(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_string()) field_error(key, "must be a string");
  return v.get<std::string>();
}

std::string ConfigRecord::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double ConfigRecord::get_double(const std::string& key) const {
  const auto& v = at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    // Bare tokens such as inf or 1e-3 that JSON rejected.
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() && *end == '\0') return d;
  }
  field_error(key, "must be a number");
}

double ConfigRecord::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long ConfigRecord::get_int(const std::string& key, long long fallback) const {
  if (!has(key)) return fallback;
  const double d = get_double(key);
  if (std::floor(d) != d || std::abs(d) > 9e15) field_error(key, "must be an integer");
  return static_cast<long long>(d);
}

Vector ConfigRecord::get_vector(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_array()) field_error(key, "must be a list of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) field_error(key, "must be a list of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Matrix ConfigRecord::get_matrix(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_array() || v.empty() || !v[0].is_array()) field_error(key, "must be a nested list of rows");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].size();
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) field_error(key, "has ragged rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) field_error(key, "must contain only numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
    }
  }
  return out;
}

Operator operator_from_config(const ConfigRecord& c) {
  const std::string kind = c.get_string("op", "rotation");
  try {
    if (kind == "rotation") return Operator::rotation(c.get_double("op.scale", 1.0));
    if (kind == "rotation_family") return Operator::rotation_family(c.get_double("op.xi"));
    if (kind == "scaled_identity") {
      return Operator::scaled_identity(c.get_double("op.mu", 1.0), static_cast<int>(c.get_int("op.dim", 2)));
    }
    if (kind == "zero") return Operator::zero(static_cast<int>(c.get_int("op.dim", 2)));
    if (kind == "l1") return Operator::l1(c.get_double("op.weight", 1.0), static_cast<int>(c.get_int("op.dim", 2)));
    if (kind == "affine") {
      Matrix m = c.get_matrix("op.M");
      Vector q = c.has("op.q") ? c.get_vector("op.q") : Vector::Zero(m.rows());
      return Operator::affine(std::move(m), std::move(q));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigParseError) throw;
    fail(ErrorCode::ConfigParseError, std::string("invalid operator: ") + e.what());
  }
  fail(ErrorCode::ConfigParseError, "unknown operator kind '" + kind + "'");
}

AnchorSchedule schedule_from_config(const ConfigRecord& c) {
  const std::string family = c.get_string("schedule", "power_law");
  const double delta = c.get_double("clamp_delta", AnchorSchedule::kDefaultClampDelta);
  try {
    if (family == "power_law") return AnchorSchedule::power_law(c.get_double("gamma", 1.0), c.get_double("p", 1.0), delta);
    if (family == "strongly_monotone") return AnchorSchedule::strongly_monotone(c.get_double("mu"), delta);
    if (family == "adaptive") return AnchorSchedule::adaptive(delta);
    if (family == "none") return AnchorSchedule::none(delta);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigParseError) throw;
    fail(ErrorCode::ConfigParseError, std::string("invalid schedule: ") + e.what());
  }
  fail(ErrorCode::ConfigParseError, "unknown schedule family '" + family + "'");
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const auto dim = traj.initial_state().size();
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x_" << i;
  out << ",resid_sq,beta\n";
  for (std::size_t j = 0; j < traj.size(); ++j) {
    out << fmt(traj.times()[j]);
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << fmt(traj.states()[j][i]);
    out << ',' << fmt(traj.residuals()[j].squaredNorm()) << ',' << fmt(traj.betas()[j]) << '\n';
  }
}

void write_iterate_csv(std::ostream& out, const IterateLog& log, bool with_iterates) {
  const auto dim = log.x0.size();
  out << "k,resid_sq,beta";
  if (with_iterates) {
    for (Eigen::Index i = 0; i < dim; ++i) out << ",x_" << i;
  }
  out << '\n';
  for (std::size_t j = 0; j < log.size(); ++j) {
    out << log.ks[j] << ',' << fmt(log.residuals[j].squaredNorm()) << ',' << fmt(log.betas[j]);
    if (with_iterates) {
      for (Eigen::Index i = 0; i < dim; ++i) out << ',' << fmt(log.xs[j][i]);
    }
    out << '\n';
  }
}

void write_pgextra_csv(std::ostream& out, const ResidualSeries& s) {
  out << "k,resid_sq_euclid,resid_sq_M,beta\n";
  for (std::size_t j = 0; j < s.k.size(); ++j) {
    out << s.k[j] << ',' << fmt(s.resid_sq_euclid[j]) << ',' << fmt(s.resid_sq_m[j]) << ',' << fmt(s.beta[j]) << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ConfigParseError, "CSV input is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(trim(cell));
  }
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string t = trim(cell);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || *end != '\0') {
        fail(ErrorCode::ConfigParseError, "CSV line " + std::to_string(number) + ": bad number '" + t + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      fail(ErrorCode::ConfigParseError, "CSV line " + std::to_string(number) + ": column count mismatch");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_loglog_svg(std::ostream& out, const std::string& title, const std::vector<SvgSeries>& series,
                      const std::string& x_label, const std::string& y_label) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, std::log10(s.x[i]));
      x_hi = std::max(x_hi, std::log10(s.x[i]));
      y_lo = std::min(y_lo, std::log10(s.y[i]));
      y_hi = std::max(y_hi, std::log10(s.y[i]));
    }
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double ly) { return kTop + (y_hi - ly) / (y_hi - y_lo) * plot_h; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(std::ceil(x_lo)); e <= static_cast<int>(std::floor(x_hi)); ++e) {
    out << "<text x=\"" << px(e) << "\" y=\"" << kHeight - kBottom + 18 << "\" font-size=\"11\" text-anchor=\"middle\">1e"
        << e << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(y_lo)); e <= static_cast<int>(std::floor(y_hi)); ++e) {
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(e) + 4 << "\" font-size=\"11\" text-anchor=\"end\">1e" << e
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kTop + plot_h / 2 << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    const auto& ser = series[s];
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      if (!(ser.x[i] > 0.0) || !(ser.y[i] > 0.0) || !std::isfinite(ser.y[i])) continue;
      out << px(std::log10(ser.x[i])) << ',' << py(std::log10(ser.y[i])) << ' ';
    }
    out << "\"/>\n";
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << xml_escape(ser.label)
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace anchor
