#pragma once

#include <initializer_list>

#include "optfield/distributions.hpp"
#include "optfield/potentials.hpp"

namespace optfield::fixtures {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Vector scalar(double x) { return Vector::Constant(1, x); }

/// psi(x) = x^2 in 1D, i.e. A = 2.
inline ConvexPotential square_1d() {
  return ConvexPotential::quadratic_from_matrix(Matrix::Constant(1, 1, 2.0), Vector::Zero(1));
}

/// psi(x) = |x| + x^2 / 2.
inline ConvexPotential abs_plus_half_square() {
  Matrix slopes(2, 1);
  slopes << 1.0, -1.0;
  return ConvexPotential::max_affine(1.0, slopes, Vector::Zero(2));
}

inline Distribution normal_1d(double mean, double variance) {
  return Distribution::gaussian(scalar(mean), Matrix::Constant(1, 1, variance));
}

}  // namespace optfield::fixtures
