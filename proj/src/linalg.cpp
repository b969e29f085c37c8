#include "anchor/linalg.hpp"

#include "anchor/error.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace anchor {

Matrix expm(const Matrix& a) {
  require(a.rows() == a.cols(), "expm: matrix must be square");
  return a.exp();
}

double min_symmetric_eigenvalue(const Matrix& a) {
  require(a.rows() == a.cols(), "symmetric part: matrix must be square");
  if (a.size() == 0) return 0.0;
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

bool all_finite(const Vector& v) { return v.allFinite(); }

void require_same_dim(const Vector& a, const Vector& b, const char* where) {
  if (a.size() != b.size()) {
    fail(ErrorCode::DimensionMismatch, std::string(where) + ": dimensions " + std::to_string(a.size()) + " and " +
                                           std::to_string(b.size()) + " differ");
  }
}

namespace {

using Gauss20 = boost::math::quadrature::gauss<double, 20>;

void add_panel(QuadratureRule& rule, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const auto& x = Gauss20::abscissa();
  const auto& w = Gauss20::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    rule.nodes.push_back(mid - half * x[i]);
    rule.weights.push_back(half * w[i]);
    rule.nodes.push_back(mid + half * x[i]);
    rule.weights.push_back(half * w[i]);
  }
}

}  // namespace

QuadratureRule graded_gauss_legendre(double t, std::size_t uniform_panels, std::size_t graded_levels,
                                     double grading_ratio) {
  require(t > 0.0, "quadrature interval must have positive length");
  require(uniform_panels >= 1, "quadrature needs at least one panel");
  require(grading_ratio > 0.0 && grading_ratio < 1.0, "grading ratio must lie in (0,1)");

  QuadratureRule rule;
  const double width = t / static_cast<double>(uniform_panels);
  double hi = width;
  for (std::size_t j = 0; j < graded_levels; ++j) {
    const double lo = hi * grading_ratio;
    add_panel(rule, lo, hi);
    hi = lo;
  }
  add_panel(rule, 0.0, hi);
  for (std::size_t p = 1; p < uniform_panels; ++p) {
    add_panel(rule, width * static_cast<double>(p), width * static_cast<double>(p + 1));
  }
  return rule;
}

}  // namespace anchor
