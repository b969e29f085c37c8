#include "anchor/operators.hpp"

#include "anchor/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace anchor {

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kKinkTolerance = 1e-12;

void check_dim(const Operator& op, const Vector& x, const char* where) {
  if (x.size() != op.dim()) {
    fail(ErrorCode::DimensionMismatch, std::string(where) + ": operator has dimension " + std::to_string(op.dim()) +
                                           ", vector has " + std::to_string(x.size()));
  }
}

}  // namespace

Vector soft_threshold(const Vector& y, double threshold) {
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double mag = std::abs(y[i]) - threshold;
    out[i] = mag > 0.0 ? std::copysign(mag, y[i]) : 0.0;
  }
  return out;
}

Operator Operator::rotation(double scale) {
  require(std::isfinite(scale), "rotation scale must be finite");
  Operator op;
  op.kind_ = OperatorKind::Rotation2D;
  op.dim_ = 2;
  op.scale_ = scale;
  op.mu_ = 0.0;
  op.lipschitz_ = std::abs(scale);
  op.m_ = Matrix{{0.0, scale}, {-scale, 0.0}};
  op.q_ = Vector::Zero(2);
  return op;
}

Operator Operator::rotation_family(double xi) { return rotation(2.0 * std::numbers::pi * xi); }

Operator Operator::scaled_identity(double mu, int dim) {
  require(mu >= 0.0 && std::isfinite(mu), "scaled identity needs a finite mu >= 0");
  require(dim >= 1, "dimension must be positive");
  Operator op;
  op.kind_ = OperatorKind::ScaledIdentity;
  op.dim_ = dim;
  op.scale_ = mu;
  op.mu_ = mu;
  op.lipschitz_ = mu;
  op.m_ = mu * Matrix::Identity(dim, dim);
  op.q_ = Vector::Zero(dim);
  return op;
}

Operator Operator::affine(Matrix m, Vector q) {
  require(m.rows() == m.cols() && m.rows() >= 1, "affine operator needs a nonempty square matrix");
  if (q.size() != m.rows()) fail(ErrorCode::DimensionMismatch, "affine operator: offset length differs from matrix size");
  require(m.allFinite() && q.allFinite(), "affine operator entries must be finite");
  const double lam_min = min_symmetric_eigenvalue(m);
  if (lam_min < -kPsdTolerance) {
    std::ostringstream msg;
    msg << "affine operator is not monotone: symmetric part has eigenvalue " << lam_min;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  Operator op;
  op.kind_ = OperatorKind::AffineMonotone;
  op.dim_ = static_cast<int>(m.rows());
  op.mu_ = std::max(lam_min, 0.0);
  op.lipschitz_ = spectral_norm(m);
  op.m_ = std::move(m);
  op.q_ = std::move(q);
  return op;
}

Operator Operator::zero(int dim) {
  require(dim >= 1, "dimension must be positive");
  return affine(Matrix::Zero(dim, dim), Vector::Zero(dim));
}

Operator Operator::l1(double weight, int dim) {
  require(weight >= 0.0 && std::isfinite(weight), "l1 weight must be finite and nonnegative");
  require(dim >= 1, "dimension must be positive");
  Operator op;
  op.kind_ = OperatorKind::L1Subdifferential;
  op.dim_ = dim;
  op.weight_ = weight;
  op.q_ = Vector::Zero(dim);
  return op;
}

const Matrix& Operator::matrix() const {
  require(is_linear(), "the l1 subdifferential has no matrix form");
  return m_;
}

std::string Operator::name() const {
  std::ostringstream out;
  switch (kind_) {
    case OperatorKind::Rotation2D: out << "rotation(scale=" << scale_ << ")"; break;
    case OperatorKind::ScaledIdentity: out << "scaled_identity(mu=" << mu_ << ",dim=" << dim_ << ")"; break;
    case OperatorKind::AffineMonotone: out << "affine(dim=" << dim_ << ")"; break;
    case OperatorKind::L1Subdifferential: out << "l1(weight=" << weight_ << ",dim=" << dim_ << ")"; break;
  }
  return out.str();
}

Vector eval(const Operator& op, const Vector& x) {
  check_dim(op, x, "eval");
  switch (op.kind()) {
    case OperatorKind::Rotation2D: return Vector{{op.scale() * x[1], -op.scale() * x[0]}};
    case OperatorKind::ScaledIdentity: return op.mu() * x;
    case OperatorKind::AffineMonotone: return op.matrix() * x + op.offset();
    case OperatorKind::L1Subdifferential: {
      Vector out(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) < kKinkTolerance) {
          fail(ErrorCode::NotSingleValuedHere, "l1 subdifferential is set-valued at coordinate " + std::to_string(i));
        }
        out[i] = std::copysign(op.weight(), x[i]);
      }
      return out;
    }
  }
  return {};
}

ResolventMap::ResolventMap(const Operator& op, double h) : op_(op), h_(h) {
  require(h > 0.0 && std::isfinite(h), "resolvent step must be positive");
  if (op_.kind() == OperatorKind::AffineMonotone || op_.kind() == OperatorKind::Rotation2D) {
    const Matrix system = Matrix::Identity(op_.dim(), op_.dim()) + h_ * op_.matrix();
    lu_.compute(system);
  }
}

Vector ResolventMap::operator()(const Vector& y) const {
  check_dim(op_, y, "resolvent");
  switch (op_.kind()) {
    case OperatorKind::ScaledIdentity: return y / (1.0 + h_ * op_.mu());
    case OperatorKind::L1Subdifferential: return soft_threshold(y, h_ * op_.weight());
    case OperatorKind::Rotation2D:
    case OperatorKind::AffineMonotone: {
      const Vector rhs = y - h_ * op_.offset();
      Vector x = lu_.solve(rhs);
      const double back = (x + h_ * (op_.matrix() * x + op_.offset()) - y).norm();
      if (!x.allFinite() || back > 1e-10 * (1.0 + y.norm())) {
        fail(ErrorCode::SingularSystem, "factorization of I + hM failed (back-substitution residual " +
                                            std::to_string(back) + ")");
      }
      return x;
    }
  }
  return {};
}

Vector resolvent(const Operator& op, const Vector& y, double h) { return ResolventMap(op, h)(y); }

Vector reflected_resolvent(const Operator& op, const Vector& y, double h) { return 2.0 * resolvent(op, y, h) - y; }

Vector yosida(const Operator& op, double lambda, const Vector& x) {
  require(lambda > 0.0, "Yosida parameter must be positive");
  return (x - resolvent(op, x, lambda)) / lambda;
}

Vector selection_residual(const Vector& y_prev, const Vector& x, double h) {
  require_same_dim(y_prev, x, "selection_residual");
  require(h > 0.0, "step must be positive");
  return (y_prev - x) / h;
}

bool in_graph(const Operator& op, const Vector& x, const Vector& u, double tol) {
  check_dim(op, x, "in_graph");
  check_dim(op, u, "in_graph");
  if (op.is_linear()) {
    return (u - eval(op, x)).norm() <= tol * (1.0 + u.norm());
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < kKinkTolerance) {
      if (std::abs(u[i]) > op.weight() + tol) return false;
    } else if (std::abs(u[i] - std::copysign(op.weight(), x[i])) > tol) {
      return false;
    }
  }
  return true;
}

std::optional<Vector> zero_point(const Operator& op) {
  if (op.kind() != OperatorKind::AffineMonotone) return Vector::Zero(op.dim());
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(op.matrix());
  Vector z = cod.solve(-op.offset());
  if ((op.matrix() * z + op.offset()).norm() > 1e-9 * (1.0 + op.offset().norm())) return std::nullopt;
  return z;
}

}  // namespace anchor
