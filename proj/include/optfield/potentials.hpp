#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

namespace optfield {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultRidge = 1e-6;
inline constexpr double kDefaultStrength = 0.1;

/// psi(x) = 0.5 x^T A x + b^T x + c with A = L L^T + ridge * I.
struct QuadraticForm {
  Matrix factor;  // lower triangular L
  Vector shift;   // b
  double offset = 0.0;
  double ridge = kDefaultRidge;
  Matrix hessian;               // A, cached
  Eigen::LLT<Matrix> hessian_llt;
};

/// psi(x) = (alpha / 2) ||x||^2 + max_k (slopes_k . x + intercepts_k).
struct RegularizedMaxAffine {
  double strength = kDefaultStrength;  // alpha, fixed (not a parameter)
  Matrix slopes;                       // K x D
  Vector intercepts;                   // K
};

/// A strongly convex potential psi : R^D -> R from one of two parametrized
/// families. Immutable; every member function is a pure function.
///
/// Flat parameter layout (theta):
///   quadratic:  lower triangle of L row-major, then b, then c
///   max-affine: slopes row-major, then intercepts (alpha is fixed)
class ConvexPotential {
 public:
  enum class Family { kQuadratic, kMaxAffine };

  static ConvexPotential quadratic(Matrix factor, Vector shift, double offset = 0.0,
                                   double ridge = kDefaultRidge);
  /// Builds L = chol(A - ridge * I); A must exceed ridge * I.
  static ConvexPotential quadratic_from_matrix(const Matrix& a, Vector shift, double offset = 0.0,
                                               double ridge = kDefaultRidge);
  /// 0.5 ||x||^2, the potential of the identity map.
  static ConvexPotential half_squared_norm(int dims, double ridge = kDefaultRidge);
  static ConvexPotential max_affine(double strength, Matrix slopes, Vector intercepts);

  Family family() const { return static_cast<Family>(impl_.index()); }
  std::string_view family_name() const;
  int dims() const;

  double eval(const Vector& x) const;
  /// Quadratic: A x + b. Max-affine: alpha x + slopes_{k*}, with k* the
  /// lowest index attaining the max.
  Vector grad(const Vector& x) const;
  /// Element of the subdifferential selected by convex weights over the
  /// max-affine pieces (ignored for quadratics). Empty weights mean grad().
  Vector subgradient(const Vector& x, const Vector& piece_weights) const;
  /// Lowest index attaining the max (max-affine); 0 for quadratics.
  Eigen::Index active_piece(const Vector& x) const;

  Eigen::Index param_count() const;
  Vector params() const;
  ConvexPotential with_params(const Vector& theta) const;

  /// d psi(x) / d theta. Max-affine pieces are weighted by piece_weights
  /// (default: one-hot at the active piece).
  Vector param_grad(const Vector& x, const Vector& piece_weights = Vector()) const;
  /// d/d theta of w^T grad psi(x), holding x and w fixed.
  Vector param_grad_of_gradient(const Vector& x, const Vector& w,
                                const Vector& piece_weights = Vector()) const;

  /// Strong-convexity modulus: ridge for quadratics, alpha for max-affine.
  /// (A quadratic is in fact lambda_min(A)-strongly convex; ridge is the
  /// structural lower bound.)
  double strong_convexity() const;

  const QuadraticForm* as_quadratic() const { return std::get_if<QuadraticForm>(&impl_); }
  const RegularizedMaxAffine* as_max_affine() const {
    return std::get_if<RegularizedMaxAffine>(&impl_);
  }

 private:
  using Impl = std::variant<QuadraticForm, RegularizedMaxAffine>;
  explicit ConvexPotential(Impl impl) : impl_(std::move(impl)) {}
  Impl impl_;
};

/// Random quadratic with a well-conditioned Hessian and shift/offset of
/// order `scale`.
ConvexPotential random_quadratic(int dims, std::uint64_t seed, double scale = 1.0);
/// Random max-affine with standard normal slopes and intercepts of order 0.5.
ConvexPotential random_max_affine(int dims, int pieces, double strength, std::uint64_t seed);

}  // namespace optfield
