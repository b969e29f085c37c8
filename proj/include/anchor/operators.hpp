#pragma once

#include "anchor/linalg.hpp"

#include <optional>
#include <string>

namespace anchor {

enum class OperatorKind { Rotation2D, ScaledIdentity, AffineMonotone, L1Subdifferential };

// A maximal monotone operator on R^n that can be evaluated (where single
// valued) and whose resolvent is available in closed form or by a dense solve.
//
// Instances are immutable; build them through the named constructors, which
// validate monotonicity and dimensions.
class Operator {
 public:
  /// A = scale * (0 1; -1 0).
  static Operator rotation(double scale = 1.0);
  /// The family A_xi = 2*pi*xi * (0 1; -1 0).
  static Operator rotation_family(double xi);
  static Operator scaled_identity(double mu, int dim);
  /// A(x) = M x + q. Requires the symmetric part of M to be positive semidefinite.
  static Operator affine(Matrix m, Vector q);
  static Operator zero(int dim);
  /// Subdifferential of weight * ||x||_1.
  static Operator l1(double weight, int dim);

  OperatorKind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// Strong monotonicity modulus (0 when merely monotone).
  double mu() const { return mu_; }
  /// Lipschitz constant; empty for the set-valued l1 subdifferential.
  std::optional<double> lipschitz() const { return lipschitz_; }
  bool is_linear() const { return kind_ != OperatorKind::L1Subdifferential; }
  double scale() const { return scale_; }
  double weight() const { return weight_; }

  /// Matrix part of a linear operator (rotation, scaled identity, affine).
  const Matrix& matrix() const;
  /// Constant part (zero except for affine operators).
  const Vector& offset() const { return q_; }

  std::string name() const;

 private:
  Operator() = default;

  OperatorKind kind_ = OperatorKind::AffineMonotone;
  int dim_ = 0;
  double mu_ = 0.0;
  std::optional<double> lipschitz_;
  double scale_ = 0.0;
  double weight_ = 0.0;
  Matrix m_;
  Vector q_;
};

/// A(x). Throws NotSingleValuedHere for the l1 subdifferential at a kink.
Vector eval(const Operator& op, const Vector& x);

/// J_{hA}(y) = (I + hA)^{-1} y.
Vector resolvent(const Operator& op, const Vector& y, double h);

/// Resolvent with the factorization of (I + hM) cached, for hot loops.
class ResolventMap {
 public:
  ResolventMap(const Operator& op, double h);

  Vector operator()(const Vector& y) const;
  double step() const { return h_; }
  const Operator& op() const { return op_; }

 private:
  Operator op_;
  double h_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// R_{hA} = 2 J_{hA} - I.
Vector reflected_resolvent(const Operator& op, const Vector& y, double h);

/// A_lambda(x) = (x - J_{lambda A} x) / lambda.
Vector yosida(const Operator& op, double lambda, const Vector& x);

/// sign(y) max(|y| - threshold, 0), the prox of threshold * |.|_1.
Vector soft_threshold(const Vector& y, double threshold);

/// (y_prev - x) / h, the element of A(x) certified by x = J_{hA}(y_prev).
Vector selection_residual(const Vector& y_prev, const Vector& x, double h);

/// True when u lies in A(x) up to `tol` (componentwise for l1).
bool in_graph(const Operator& op, const Vector& x, const Vector& u, double tol = 1e-9);

/// A zero of the operator when one can be computed exactly: the origin for the
/// rotation, scaled identity and l1 kinds; the minimum-norm solution of Mx = -q
/// for affine operators (empty if Mx = -q is inconsistent).
std::optional<Vector> zero_point(const Operator& op);

}  // namespace anchor
