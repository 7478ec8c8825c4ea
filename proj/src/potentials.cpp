#include "optfield/potentials.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "optfield/rng.hpp"

namespace optfield {

namespace {

Eigen::Index triangle_size(Eigen::Index d) { return d * (d + 1) / 2; }

QuadraticForm make_quadratic(Matrix factor, Vector shift, double offset, double ridge) {
  const auto d = factor.rows();
  if (d < 1 || factor.cols() != d || shift.size() != d) {
    throw std::invalid_argument("quadratic: factor must be DxD and shift length D");
  }
  if (!(ridge > 0.0) || !std::isfinite(ridge)) {
    throw std::invalid_argument("quadratic: ridge must be positive");
  }
  if (!factor.allFinite() || !shift.allFinite() || !std::isfinite(offset)) {
    throw std::invalid_argument("quadratic: non-finite parameters");
  }
  factor.triangularView<Eigen::StrictlyUpper>().setZero();
  QuadraticForm q;
  q.hessian = factor * factor.transpose();
  q.hessian.diagonal().array() += ridge;
  q.hessian_llt.compute(q.hessian);
  q.factor = std::move(factor);
  q.shift = std::move(shift);
  q.offset = offset;
  q.ridge = ridge;
  return q;
}

double max_affine_value(const RegularizedMaxAffine& m, const Vector& x, Eigen::Index* arg) {
  Eigen::Index best_k = 0;
  double best = m.slopes.row(0).dot(x) + m.intercepts(0);
  for (Eigen::Index k = 1; k < m.slopes.rows(); ++k) {
    const double v = m.slopes.row(k).dot(x) + m.intercepts(k);
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  if (arg != nullptr) *arg = best_k;
  return best;
}

Vector one_hot(Eigen::Index size, Eigen::Index k) {
  Vector w = Vector::Zero(size);
  w(k) = 1.0;
  return w;
}

}  // namespace

ConvexPotential ConvexPotential::quadratic(Matrix factor, Vector shift, double offset,
                                           double ridge) {
  return ConvexPotential(make_quadratic(std::move(factor), std::move(shift), offset, ridge));
}

ConvexPotential ConvexPotential::quadratic_from_matrix(const Matrix& a, Vector shift,
                                                       double offset, double ridge) {
  if (a.rows() != a.cols()) throw std::invalid_argument("quadratic: A must be square");
  Matrix reduced = 0.5 * (a + a.transpose());
  reduced.diagonal().array() -= ridge;
  Eigen::LLT<Matrix> llt(reduced);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("quadratic: A - ridge*I is not positive definite");
  }
  return quadratic(llt.matrixL(), std::move(shift), offset, ridge);
}

ConvexPotential ConvexPotential::half_squared_norm(int dims, double ridge) {
  return quadratic_from_matrix(Matrix::Identity(dims, dims), Vector::Zero(dims), 0.0, ridge);
}

ConvexPotential ConvexPotential::max_affine(double strength, Matrix slopes, Vector intercepts) {
  if (!(strength > 0.0) || !std::isfinite(strength)) {
    throw std::invalid_argument("max_affine: strength must be positive");
  }
  if (slopes.rows() < 1 || slopes.cols() < 1 || intercepts.size() != slopes.rows()) {
    throw std::invalid_argument("max_affine: need K >= 1 slopes and K intercepts");
  }
  if (!slopes.allFinite() || !intercepts.allFinite()) {
    throw std::invalid_argument("max_affine: non-finite parameters");
  }
  return ConvexPotential(RegularizedMaxAffine{strength, std::move(slopes), std::move(intercepts)});
}

std::string_view ConvexPotential::family_name() const {
  return family() == Family::kQuadratic ? "quadratic" : "max_affine";
}

int ConvexPotential::dims() const {
  if (const auto* q = as_quadratic()) return static_cast<int>(q->factor.rows());
  return static_cast<int>(as_max_affine()->slopes.cols());
}

double ConvexPotential::eval(const Vector& x) const {
  if (const auto* q = as_quadratic()) {
    return 0.5 * x.dot(q->hessian * x) + q->shift.dot(x) + q->offset;
  }
  const auto& m = *as_max_affine();
  return 0.5 * m.strength * x.squaredNorm() + max_affine_value(m, x, nullptr);
}

Vector ConvexPotential::grad(const Vector& x) const {
  if (const auto* q = as_quadratic()) return q->hessian * x + q->shift;
  const auto& m = *as_max_affine();
  Eigen::Index k = 0;
  max_affine_value(m, x, &k);
  return m.strength * x + m.slopes.row(k).transpose();
}

Vector ConvexPotential::subgradient(const Vector& x, const Vector& piece_weights) const {
  const auto* m = as_max_affine();
  if (m == nullptr || piece_weights.size() == 0) return grad(x);
  return m->strength * x + m->slopes.transpose() * piece_weights;
}

Eigen::Index ConvexPotential::active_piece(const Vector& x) const {
  const auto* m = as_max_affine();
  if (m == nullptr) return 0;
  Eigen::Index k = 0;
  max_affine_value(*m, x, &k);
  return k;
}

Eigen::Index ConvexPotential::param_count() const {
  if (const auto* q = as_quadratic()) return triangle_size(q->factor.rows()) + q->shift.size() + 1;
  const auto& m = *as_max_affine();
  return m.slopes.size() + m.intercepts.size();
}

Vector ConvexPotential::params() const {
  Vector theta(param_count());
  Eigen::Index p = 0;
  if (const auto* q = as_quadratic()) {
    const auto d = q->factor.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) theta(p++) = q->factor(i, j);
    }
    theta.segment(p, d) = q->shift;
    theta(p + d) = q->offset;
    return theta;
  }
  const auto& m = *as_max_affine();
  for (Eigen::Index k = 0; k < m.slopes.rows(); ++k) {
    for (Eigen::Index j = 0; j < m.slopes.cols(); ++j) theta(p++) = m.slopes(k, j);
  }
  theta.tail(m.intercepts.size()) = m.intercepts;
  return theta;
}

ConvexPotential ConvexPotential::with_params(const Vector& theta) const {
  if (theta.size() != param_count()) {
    throw std::invalid_argument("with_params: expected " + std::to_string(param_count()) +
                                " parameters, got " + std::to_string(theta.size()));
  }
  Eigen::Index p = 0;
  if (const auto* q = as_quadratic()) {
    const auto d = q->factor.rows();
    Matrix factor = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) factor(i, j) = theta(p++);
    }
    return quadratic(std::move(factor), theta.segment(p, d), theta(p + d), q->ridge);
  }
  const auto& m = *as_max_affine();
  Matrix slopes(m.slopes.rows(), m.slopes.cols());
  for (Eigen::Index k = 0; k < slopes.rows(); ++k) {
    for (Eigen::Index j = 0; j < slopes.cols(); ++j) slopes(k, j) = theta(p++);
  }
  return max_affine(m.strength, std::move(slopes), theta.tail(m.intercepts.size()));
}

Vector ConvexPotential::param_grad(const Vector& x, const Vector& piece_weights) const {
  Vector g(param_count());
  Eigen::Index p = 0;
  if (const auto* q = as_quadratic()) {
    // d/dL_ij of 0.5 ||L^T x||^2 is x_i (L^T x)_j.
    const auto d = q->factor.rows();
    const Vector ltx = q->factor.transpose() * x;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) g(p++) = x(i) * ltx(j);
    }
    g.segment(p, d) = x;
    g(p + d) = 1.0;
    return g;
  }
  const auto& m = *as_max_affine();
  const Vector w =
      piece_weights.size() == 0 ? one_hot(m.slopes.rows(), active_piece(x)) : piece_weights;
  for (Eigen::Index k = 0; k < m.slopes.rows(); ++k) {
    for (Eigen::Index j = 0; j < m.slopes.cols(); ++j) g(p++) = w(k) * x(j);
  }
  g.tail(m.intercepts.size()) = w;
  return g;
}

Vector ConvexPotential::param_grad_of_gradient(const Vector& x, const Vector& w,
                                               const Vector& piece_weights) const {
  Vector g = Vector::Zero(param_count());
  Eigen::Index p = 0;
  if (const auto* q = as_quadratic()) {
    // w^T (L L^T + ridge I) x + w^T b
    const auto d = q->factor.rows();
    const Vector ltx = q->factor.transpose() * x;
    const Vector ltw = q->factor.transpose() * w;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) g(p++) = w(i) * ltx(j) + x(i) * ltw(j);
    }
    g.segment(p, d) = w;
    return g;
  }
  const auto& m = *as_max_affine();
  const Vector lambda =
      piece_weights.size() == 0 ? one_hot(m.slopes.rows(), active_piece(x)) : piece_weights;
  for (Eigen::Index k = 0; k < m.slopes.rows(); ++k) {
    for (Eigen::Index j = 0; j < m.slopes.cols(); ++j) g(p++) = lambda(k) * w(j);
  }
  return g;
}

double ConvexPotential::strong_convexity() const {
  if (const auto* q = as_quadratic()) return q->ridge;
  return as_max_affine()->strength;
}

ConvexPotential random_quadratic(int dims, std::uint64_t seed, double scale) {
  Rng rng = Rng::stream(seed, StreamTag::kPotential, 0);
  Matrix factor = Matrix::Zero(dims, dims);
  const double off = 0.3 / std::sqrt(static_cast<double>(dims));
  for (int i = 0; i < dims; ++i) {
    for (int j = 0; j < i; ++j) factor(i, j) = off * rng.normal();
    factor(i, i) = 0.6 + rng.uniform();
  }
  Vector shift(dims);
  for (int j = 0; j < dims; ++j) shift(j) = scale * rng.normal();
  const double offset = scale * rng.normal();
  return ConvexPotential::quadratic(std::move(factor), std::move(shift), offset);
}

ConvexPotential random_max_affine(int dims, int pieces, double strength, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, StreamTag::kPotential, 1);
  Matrix slopes(pieces, dims);
  Vector intercepts(pieces);
  for (int k = 0; k < pieces; ++k) {
    for (int j = 0; j < dims; ++j) slopes(k, j) = rng.normal();
    intercepts(k) = 0.5 * rng.normal();
  }
  return ConvexPotential::max_affine(strength, std::move(slopes), std::move(intercepts));
}

}  // namespace optfield
