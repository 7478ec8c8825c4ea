#include <cmath>

#include <gtest/gtest.h>

#include "optfield/potentials.hpp"
#include "optfield/rng.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::scalar;
using optfield::fixtures::vec;

TEST(Potentials, EvalClosedForms) {
  EXPECT_NEAR(ConvexPotential::half_squared_norm(2).eval(vec({3, 4})), 12.5, 1e-12);
  EXPECT_NEAR(fixtures::square_1d().eval(scalar(3)), 9.0, 1e-12);
  EXPECT_DOUBLE_EQ(fixtures::abs_plus_half_square().eval(scalar(2)), 4.0);
}

TEST(Potentials, GradClosedForms) {
  const auto shifted = ConvexPotential::quadratic_from_matrix(Matrix::Identity(2, 2), vec({1, 0}));
  EXPECT_TRUE(shifted.grad(vec({0, 0})).isApprox(vec({1, 0})));
  EXPECT_NEAR(fixtures::square_1d().grad(scalar(3))(0), 6.0, 1e-12);
}

TEST(Potentials, MaxAffineTieBreaksToLowestIndex) {
  const auto psi = fixtures::abs_plus_half_square();
  EXPECT_EQ(psi.active_piece(scalar(0)), 0);
  EXPECT_DOUBLE_EQ(psi.grad(scalar(0))(0), 1.0);
  EXPECT_DOUBLE_EQ(psi.subgradient(scalar(0), vec({0.25, 0.75}))(0), -0.5);
}

TEST(Potentials, OffsetDerivativeIsOne) {
  const auto psi = ConvexPotential::quadratic(Matrix::Constant(1, 1, 0.7), scalar(0.2), 1.5);
  for (double x : {-3.0, 0.0, 2.5}) {
    EXPECT_DOUBLE_EQ(psi.param_grad(scalar(x))(2), 1.0);
  }
}

TEST(Potentials, FactorDerivativeClosedForm) {
  // d/dL of 0.5 (L^2 + eps) x^2 at L = 1, x = 2 is x^2 L = 4.
  const auto psi = ConvexPotential::quadratic(Matrix::Constant(1, 1, 1.0), scalar(0));
  EXPECT_NEAR(psi.param_grad(scalar(2))(0), 4.0, 1e-12);
}

TEST(Potentials, RejectsNonPositiveRidge) {
  EXPECT_THROW(ConvexPotential::quadratic(Matrix::Constant(1, 1, 1.0), scalar(0), 0.0, 0.0),
               std::invalid_argument);
  EXPECT_THROW(ConvexPotential::max_affine(0.0, Matrix::Ones(1, 1), scalar(0)),
               std::invalid_argument);
}

TEST(Potentials, ParamsRoundTrip) {
  for (const auto& psi : {random_quadratic(3, 4), random_max_affine(2, 5, 0.5, 4)}) {
    const Vector theta = psi.params();
    EXPECT_EQ(theta.size(), psi.param_count());
    EXPECT_EQ(psi.with_params(theta).params(), theta);
    const Vector x = vec({0.3, -1.2, 0.8}).head(psi.dims());
    EXPECT_DOUBLE_EQ(psi.with_params(theta).eval(x), psi.eval(x));
  }
}

namespace {

Vector central_difference(const ConvexPotential& psi, const Vector& x, double h) {
  const Vector theta = psi.params();
  Vector out(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Vector up = theta, down = theta;
    up(k) += h;
    down(k) -= h;
    out(k) = (psi.with_params(up).eval(x) - psi.with_params(down).eval(x)) / (2 * h);
  }
  return out;
}

Vector random_point(int dims, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, StreamTag::kEvaluation, 0);
  Vector x(dims);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST(Potentials, ParamGradMatchesCentralDifferences) {
  const double h = 1e-5;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const int dims = 1 + static_cast<int>(s % 4);
    const Vector x = random_point(dims, s);
    const auto quad = random_quadratic(dims, s);
    const Vector g = quad.param_grad(x);
    EXPECT_LE((g - central_difference(quad, x, h)).cwiseAbs().maxCoeff(), 1e-6 * (1 + g.norm()));

    // Away from kinks the active piece is stable under the perturbation.
    const auto ma = random_max_affine(dims, 4, 0.3, s);
    const Vector gm = ma.param_grad(x);
    EXPECT_LE((gm - central_difference(ma, x, h)).cwiseAbs().maxCoeff(), 1e-6 * (1 + gm.norm()));
  }
}

TEST(Potentials, ParamGradOfGradientMatchesCentralDifferences) {
  const double h = 1e-5;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const int dims = 1 + static_cast<int>(s % 3);
    const Vector x = random_point(dims, s);
    const Vector w = random_point(dims, s + 100);
    for (const auto& psi : {random_quadratic(dims, s), random_max_affine(dims, 3, 0.4, s)}) {
      const Vector analytic = psi.param_grad_of_gradient(x, w);
      const Vector theta = psi.params();
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Vector up = theta, down = theta;
        up(k) += h;
        down(k) -= h;
        const double fd =
            (w.dot(psi.with_params(up).grad(x)) - w.dot(psi.with_params(down).grad(x))) / (2 * h);
        EXPECT_NEAR(analytic(k), fd, 1e-6 * (1 + analytic.norm()));
      }
    }
  }
}

TEST(Potentials, RandomFamiliesAreStronglyConvex) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto quad = random_quadratic(3, s);
    EXPECT_GT(quad.strong_convexity(), 0.0);
    const Vector a = random_point(3, s), b = random_point(3, s + 50);
    // psi(b) >= psi(a) + <grad psi(a), b - a> + m/2 |b - a|^2
    EXPECT_GE(quad.eval(b) - quad.eval(a) - quad.grad(a).dot(b - a),
              0.5 * quad.strong_convexity() * (b - a).squaredNorm() - 1e-12);
    const auto ma = random_max_affine(3, 5, 0.2, s);
    EXPECT_DOUBLE_EQ(ma.strong_convexity(), 0.2);
    EXPECT_GE(ma.eval(b) - ma.eval(a) - ma.grad(a).dot(b - a),
              0.5 * 0.2 * (b - a).squaredNorm() - 1e-12);
  }
}

TEST(Potentials, QuadraticFromMatrixReproducesHessian) {
  Matrix a(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  const auto psi = ConvexPotential::quadratic_from_matrix(a, vec({1, -1}), 0.25);
  EXPECT_TRUE(psi.as_quadratic()->hessian.isApprox(a, 1e-14));
  const Vector x = vec({0.4, -0.7});
  EXPECT_NEAR(psi.eval(x), 0.5 * x.dot(a * x) + x.dot(vec({1, -1})) + 0.25, 1e-14);
}
