#pragma once

#include "optfield/distributions.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

/// Closed-form quadratic-cost OT between two Gaussians: T(x) = shift + A x.
struct GaussianOTSolution {
  Matrix linear_map;  // A, symmetric positive definite
  Vector shift;
  double w2_squared = 0.0;
  ConvexPotential brenier;  // 0.5 x^T A x + shift^T x
};

/// A = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2},
/// W2^2 = ||m0 - m1||^2 + tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}).
/// Square roots via symmetric eigendecomposition; throws
/// std::invalid_argument if an eigenvalue is <= 1e-12.
GaussianOTSolution bures_map(const Distribution& g0, const Distribution& g1);

/// Symmetric square root and inverse square root of an SPD matrix.
Matrix spd_sqrt(const Matrix& m);
Matrix spd_inv_sqrt(const Matrix& m);

/// CDF and quantile function of a 1D Gaussian or Uniform distribution.
double cdf_1d(const Distribution& d, double x);
/// Inverse CDF by bisection to 1e-12.
double quantile_1d(const Distribution& d, double p);

/// Monotone 1D OT map F1^{-1}(F0(x)). Points outside a Uniform source's
/// support are clamped with a warning on stderr.
double quantile_map_1d(const Distribution& d0, const Distribution& d1, double x);

struct Box {
  Vector lower;
  Vector upper;
};

struct GridConjugate {
  double value = 0.0;
  Vector argmax;
  /// The best grid point touches the box boundary; the box probably does
  /// not contain the true maximizer.
  bool on_boundary = false;
};

/// Brute-force max of <y, z> - f(z) over a regular grid on `box` with
/// points_per_dim nodes per axis (endpoints included). D <= 2.
GridConjugate grid_conjugate(const ConvexPotential& f, const Vector& y, const Box& box,
                             Eigen::Index points_per_dim);

}  // namespace optfield
