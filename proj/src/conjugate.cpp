#include "optfield/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace optfield {

namespace {

ConvexPotential blend(const ConvexPotential& base, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("time must lie in [0, 1]");
  if (const auto* q = base.as_quadratic()) {
    return ConvexPotential::quadratic(std::sqrt(t) * q->factor, t * q->shift, t * q->offset,
                                      t * q->ridge + (1.0 - t));
  }
  const auto& m = *base.as_max_affine();
  return ConvexPotential::max_affine(t * m.strength + (1.0 - t), t * m.slopes, t * m.intercepts);
}

ConjugateResult conjugate_quadratic(const QuadraticForm& q, const Vector& y) {
  ConjugateResult r;
  const Vector centered = y - q.shift;
  r.argmax = q.hessian_llt.solve(centered);
  r.value = 0.5 * centered.dot(r.argmax) - q.offset;
  r.grad_norm = (centered - q.hessian * r.argmax).norm();
  return r;
}

// Advances `idx` to the next size-s combination of {0..k-1}; false when done.
bool next_combination(std::vector<Eigen::Index>& idx, Eigen::Index k) {
  const auto s = static_cast<Eigen::Index>(idx.size());
  for (Eigen::Index i = s - 1; i >= 0; --i) {
    if (idx[i] < k - s + i) {
      ++idx[i];
      for (Eigen::Index j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// settings.tol is the relative KKT certification tolerance; settings.max_iters
// caps the number of candidate supports examined.
ConjugateResult conjugate_max_affine(const RegularizedMaxAffine& m, const Vector& y,
                                     const SolverSettings& settings) {
  const Eigen::Index k_pieces = m.slopes.rows();
  const Eigen::Index d = m.slopes.cols();
  const double alpha = m.strength;
  const double slope_scale = std::max(m.slopes.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::Index max_support = std::min<Eigen::Index>(k_pieces, d + 1);

  ConjugateResult best;
  double best_violation = std::numeric_limits<double>::infinity();
  int examined = 0;

  for (Eigen::Index s = 1; s <= max_support; ++s) {
    std::vector<Eigen::Index> idx(s);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    do {
      if (examined >= settings.max_iters) {
        best.iterations = examined;
        throw MaxItersExceeded("max-affine conjugate: support budget exhausted", best);
      }
      ++examined;
      Matrix support(s, d);
      Vector heights(s);
      for (Eigen::Index i = 0; i < s; ++i) {
        support.row(i) = m.slopes.row(idx[i]);
        heights(i) = m.intercepts(idx[i]);
      }
      if (s > 1) {
        const Matrix edges = support.bottomRows(s - 1).rowwise() - support.row(0);
        Eigen::ColPivHouseholderQR<Matrix> qr(edges);
        qr.setThreshold(1e-10);
        if (qr.rank() < s - 1) continue;
      }
      // KKT of the simplex-constrained dual restricted to the support:
      //   (S S^T / alpha) lambda + mu 1 = S y / alpha + c,   1^T lambda = 1.
      Matrix kkt = Matrix::Zero(s + 1, s + 1);
      kkt.topLeftCorner(s, s) = support * support.transpose() / alpha;
      kkt.topRightCorner(s, 1).setOnes();
      kkt.bottomLeftCorner(1, s).setOnes();
      Vector rhs(s + 1);
      rhs.head(s) = support * y / alpha + heights;
      rhs(s) = 1.0;
      const Vector solution = kkt.fullPivLu().solve(rhs);
      Vector lambda = solution.head(s);
      if (!lambda.allFinite()) continue;
      const double negative = std::max(0.0, -lambda.minCoeff());
      lambda = lambda.cwiseMax(0.0);
      lambda /= lambda.sum();
      const Vector z = (y - support.transpose() * lambda) / alpha;

      double level = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < s; ++i) {
        level = std::max(level, m.slopes.row(idx[i]).dot(z) + m.intercepts(idx[i]));
      }
      double top = level;
      for (Eigen::Index k = 0; k < k_pieces; ++k) {
        top = std::max(top, m.slopes.row(k).dot(z) + m.intercepts(k));
      }
      const double feasibility_tol =
          settings.tol * (1.0 + std::abs(level) + slope_scale * z.cwiseAbs().sum());
      const double violation = std::max(top - level - feasibility_tol, 0.0) +
                               std::max(negative - settings.tol, 0.0);

      if (violation < best_violation) {
        best_violation = violation;
        best.argmax = z;
        best.piece_weights = Vector::Zero(k_pieces);
        for (Eigen::Index i = 0; i < s; ++i) best.piece_weights(idx[i]) = lambda(i);
        best.value = y.dot(z) - (0.5 * alpha * z.squaredNorm() + top);
        best.grad_norm =
            (y - alpha * z - m.slopes.transpose() * best.piece_weights).norm() + violation;
      }
      if (violation <= 0.0) {
        best.iterations = examined;
        return best;
      }
    } while (next_combination(idx, k_pieces));
  }
  best.iterations = examined;
  throw MaxItersExceeded("max-affine conjugate: no certified maximizer (residual " +
                             std::to_string(best.grad_norm) + ")",
                         best);
}

}  // namespace

TimeScaledPotential::TimeScaledPotential(const ConvexPotential& base, double t)
    : t_(t), blended_(blend(base, t)) {}

ConjugateResult conjugate(const ConvexPotential& f, const Vector& y,
                          const SolverSettings& settings) {
  if (y.size() != f.dims()) throw std::invalid_argument("conjugate: dimension mismatch");
  if (!y.allFinite()) throw std::invalid_argument("conjugate: non-finite point");
  if (const auto* q = f.as_quadratic()) return conjugate_quadratic(*q, y);
  return conjugate_max_affine(*f.as_max_affine(), y, settings);
}

ConjugateResult conjugate(const TimeScaledPotential& f, const Vector& y,
                          const SolverSettings& settings) {
  return conjugate(f.blended(), y, settings);
}

ConjugateResult solve_start_point(const ConvexPotential& psi, double t, const Vector& x,
                                  const SolverSettings& settings) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("time must lie in [0, 1]");
  if (t == 0.0) {
    ConjugateResult r;
    r.argmax = x;
    r.value = 0.5 * x.squaredNorm();
    if (const auto* m = psi.as_max_affine()) {
      r.piece_weights = Vector::Zero(m->slopes.rows());
      r.piece_weights(psi.active_piece(x)) = 1.0;
    }
    return r;
  }
  return conjugate(TimeScaledPotential(psi, t), x, settings);
}

Vector recover_z0(const ConvexPotential& psi, double t, const Vector& x,
                  const SolverSettings& settings) {
  return solve_start_point(psi, t, x, settings).argmax;
}

}  // namespace optfield
