#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace anchor {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Matrix exponential by Pade scaling-and-squaring.
Matrix expm(const Matrix& a);

/// Smallest eigenvalue of the symmetric part (A + A^T)/2.
double min_symmetric_eigenvalue(const Matrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

bool all_finite(const Vector& v);

void require_same_dim(const Vector& a, const Vector& b, const char* where);

// Quadrature rule on an interval: nodes and weights.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Composite 20-point Gauss-Legendre on [0, t]. The first of `uniform_panels`
/// equal panels is split geometrically towards 0 so integrands with an
/// algebraic singularity at the origin keep full accuracy.
QuadratureRule graded_gauss_legendre(double t, std::size_t uniform_panels, std::size_t graded_levels = 24,
                                     double grading_ratio = 0.25);

}  // namespace anchor
