#include "optfield/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace optfield {

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> spd_eigen(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 1e-12) {
    throw std::invalid_argument("matrix is not symmetric positive definite");
  }
  return eig;
}

const Gaussian& require_gaussian(const Distribution& d, const char* what) {
  const Gaussian* g = d.as_gaussian();
  if (g == nullptr) throw std::invalid_argument(std::string(what) + " must be Gaussian");
  return *g;
}

void require_1d(const Distribution& d) {
  if (d.dims() != 1 || !(d.as_gaussian() || d.as_uniform())) {
    throw std::invalid_argument("1D quantile oracle needs a 1D Gaussian or Uniform");
  }
}

double max_of_pieces(const RegularizedMaxAffine& m, const double* z, Eigen::Index d) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m.slopes.rows(); ++k) {
    double v = m.intercepts(k);
    for (Eigen::Index j = 0; j < d; ++j) v += m.slopes(k, j) * z[j];
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

Matrix spd_sqrt(const Matrix& m) {
  const auto eig = spd_eigen(m);
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix spd_inv_sqrt(const Matrix& m) {
  const auto eig = spd_eigen(m);
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

GaussianOTSolution bures_map(const Distribution& g0, const Distribution& g1) {
  const Gaussian& a = require_gaussian(g0, "bures_map: g0");
  const Gaussian& b = require_gaussian(g1, "bures_map: g1");
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("bures_map: dims differ");
  const Matrix root0 = spd_sqrt(a.covariance);
  const Matrix inv_root0 = spd_inv_sqrt(a.covariance);
  const Matrix cross = spd_sqrt(root0 * b.covariance * root0);
  Matrix map = inv_root0 * cross * inv_root0;
  map = 0.5 * (map + map.transpose());
  Vector shift = b.mean - map * a.mean;
  const double w2 = (a.mean - b.mean).squaredNorm() +
                    (a.covariance + b.covariance - 2.0 * cross).trace();
  ConvexPotential brenier = ConvexPotential::quadratic_from_matrix(map, shift);
  return GaussianOTSolution{std::move(map), std::move(shift), w2, std::move(brenier)};
}

double cdf_1d(const Distribution& d, double x) {
  require_1d(d);
  if (const auto* g = d.as_gaussian()) {
    const double sd = std::sqrt(g->covariance(0, 0));
    return 0.5 * std::erfc(-(x - g->mean(0)) / (sd * std::numbers::sqrt2));
  }
  const auto* u = d.as_uniform();
  return std::clamp((x - u->lower(0)) / (u->upper(0) - u->lower(0)), 0.0, 1.0);
}

double quantile_1d(const Distribution& d, double p) {
  require_1d(d);
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
  double lo = 0.0;
  double hi = 0.0;
  if (const auto* g = d.as_gaussian()) {
    const double sd = std::sqrt(g->covariance(0, 0));
    lo = g->mean(0) - 40.0 * sd;
    hi = g->mean(0) + 40.0 * sd;
  } else {
    lo = d.as_uniform()->lower(0);
    hi = d.as_uniform()->upper(0);
  }
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cdf_1d(d, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double quantile_map_1d(const Distribution& d0, const Distribution& d1, double x) {
  require_1d(d0);
  require_1d(d1);
  if (const auto* u = d0.as_uniform(); u != nullptr && (x < u->lower(0) || x > u->upper(0))) {
    std::cerr << "warning: quantile_map_1d: " << x << " outside source support, clamped\n";
    x = std::clamp(x, u->lower(0), u->upper(0));
  }
  return quantile_1d(d1, cdf_1d(d0, x));
}

GridConjugate grid_conjugate(const ConvexPotential& f, const Vector& y, const Box& box,
                             Eigen::Index points_per_dim) {
  const Eigen::Index d = f.dims();
  if (d > 2) throw std::invalid_argument("grid_conjugate: D <= 2 only");
  if (y.size() != d || box.lower.size() != d || box.upper.size() != d) {
    throw std::invalid_argument("grid_conjugate: dimension mismatch");
  }
  if (points_per_dim < 2) throw std::invalid_argument("grid_conjugate: need >= 2 points");

  const Vector step = (box.upper - box.lower) / static_cast<double>(points_per_dim - 1);
  const Eigen::Index n1 = d == 2 ? points_per_dim : 1;
  const auto* m = f.as_max_affine();

  GridConjugate best;
  best.value = -std::numeric_limits<double>::infinity();
  Eigen::Index best_i = 0;
  Eigen::Index best_j = 0;
  Vector z(d);
  for (Eigen::Index i = 0; i < points_per_dim; ++i) {
    z(0) = box.lower(0) + i * step(0);
    for (Eigen::Index j = 0; j < n1; ++j) {
      if (d == 2) z(1) = box.lower(1) + j * step(1);
      const double fz = m != nullptr
                            ? 0.5 * m->strength * z.squaredNorm() + max_of_pieces(*m, z.data(), d)
                            : f.eval(z);
      const double v = y.dot(z) - fz;
      if (v > best.value) {
        best.value = v;
        best_i = i;
        best_j = j;
      }
    }
  }
  best.argmax.resize(d);
  best.argmax(0) = box.lower(0) + best_i * step(0);
  if (d == 2) best.argmax(1) = box.lower(1) + best_j * step(1);
  const Eigen::Index last = points_per_dim - 1;
  best.on_boundary = best_i == 0 || best_i == last || (d == 2 && (best_j == 0 || best_j == last));
  return best;
}

}  // namespace optfield
