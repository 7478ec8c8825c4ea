#include <cmath>

#include <gtest/gtest.h>

#include "optfield/optimal_fields.hpp"
#include "optfield/rng.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::scalar;
using optfield::fixtures::vec;

namespace {

struct Point {
  double t;
  Vector x;
};

Point random_point(int dims, std::uint64_t seed, std::uint64_t k) {
  Rng rng = Rng::stream(seed, StreamTag::kEvaluation, k);
  Point p{0.05 + 0.9 * rng.uniform(), Vector(dims)};
  for (auto& v : p.x) v = 2.0 * rng.normal();
  return p;
}

}  // namespace

TEST(OptimalFields, IdentityPotentialGivesZeroField) {
  const auto psi = ConvexPotential::half_squared_norm(2);
  for (double t : {0.0, 0.3, 1.0}) {
    const auto f = evaluate_field(psi, t, vec({1.5, -2}));
    EXPECT_LE(f.velocity.norm(), 1e-5);
    EXPECT_NEAR(f.s_value, 0.0, 1e-5);
    EXPECT_NEAR(f.s_dt, 0.0, 1e-10);
    EXPECT_NEAR(bracket(psi, t, vec({1.5, -2})), 0.0, 1e-15);
  }
}

TEST(OptimalFields, SquarePotentialClosedForms) {
  const auto psi = fixtures::square_1d();
  EXPECT_NEAR(field_velocity(psi, 0.5, scalar(3))(0), 2.0, 1e-12);
  EXPECT_NEAR(s_eval(psi, 0.5, scalar(3)), 3.0, 1e-12);
  EXPECT_NEAR(s_eval(psi, 1.0, scalar(4)), 4.0, 1e-12);
  EXPECT_NEAR(s_time_derivative(psi, 0.5, scalar(3)), -2.0, 1e-12);
  EXPECT_NEAR(bracket(psi, 0.5, scalar(3)), 0.0, 1e-12);
}

TEST(OptimalFields, TranslationFieldAtTimeZero) {
  const auto psi = ConvexPotential::quadratic_from_matrix(Matrix::Identity(2, 2), vec({1, -2}));
  for (const Vector& x : {vec({0, 0}), vec({3, 1})}) {
    EXPECT_LE((field_velocity(psi, 0.0, x) - vec({1, -2})).norm(), 1e-5);
  }
}

TEST(OptimalFields, GradientOfSIsTheVelocity) {
  const double h = 1e-5;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto psi = random_quadratic(2, s);
    const auto p = random_point(2, s, 0);
    const Vector u = field_velocity(psi, p.t, p.x);
    for (Eigen::Index j = 0; j < 2; ++j) {
      Vector up = p.x, down = p.x;
      up(j) += h;
      down(j) -= h;
      EXPECT_NEAR((s_eval(psi, p.t, up) - s_eval(psi, p.t, down)) / (2 * h), u(j), 1e-6);
    }
  }
}

TEST(OptimalFields, TimeDerivativeMatchesCentralDifference) {
  const double h = 1e-4;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto psi = random_quadratic(1 + static_cast<int>(s % 3), s);
    const auto p = random_point(psi.dims(), s, 1);
    const double fd = (s_eval(psi, p.t + h, p.x) - s_eval(psi, p.t - h, p.x)) / (2 * h);
    EXPECT_NEAR(s_time_derivative(psi, p.t, p.x), fd, 1e-3);
  }
}

TEST(OptimalFields, AuditedBracketVanishes) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto psi = random_quadratic(2, s);
    const auto p = random_point(2, s, 2);
    const auto audit = audited_bracket(psi, p.t, p.x);
    ASSERT_TRUE(audit.has_value());
    EXPECT_LE(std::abs(*audit), 1e-3);
  }
}

TEST(OptimalFields, AuditOnAndAcrossAKinkFace) {
  // For |x| + x^2/2 at t = 0.5 the kink face covers x_t in [-0.5, 0.5].
  // Inside it the audit is well defined; at its edge the stencil changes
  // the active pieces and the audit declines.
  const auto psi = fixtures::abs_plus_half_square();
  const auto inside = audited_bracket(psi, 0.5, scalar(0.1));
  ASSERT_TRUE(inside.has_value());
  EXPECT_LE(std::abs(*inside), 1e-3);
  EXPECT_FALSE(audited_bracket(psi, 0.5, scalar(0.5)).has_value());
}

TEST(OptimalFields, VelocityIsTheCertifiedSubgradientOnAKinkFace) {
  // psi = |x| + x^2/2, t = 0.5: phi_t = 0.5|x| + 0.75 x^2 has a kink at 0 and
  // maps the face {0} to the interval [-0.5, 0.5] of x_t. There z0 = 0 and
  // the trajectory through x_t ends at 2 x_t, so u = 2 x_t.
  const auto psi = fixtures::abs_plus_half_square();
  for (double x : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
    const auto f = evaluate_field(psi, 0.5, scalar(x));
    EXPECT_NEAR(f.z0(0), 0.0, 1e-14);
    EXPECT_NEAR(f.velocity(0), 2 * x, 1e-12) << x;
    EXPECT_NEAR(0.5 * f.velocity.squaredNorm() + f.s_dt, 0.0, 1e-15);
  }
}

TEST(Pushforward, IdentityAndTranslation) {
  Matrix x0(3, 2);
  x0 << 1, 2, -1, 0.5, 0, 0;
  const auto identity = ConvexPotential::half_squared_norm(2);
  EXPECT_LE((pushforward(identity, x0, 7, OdeMethod::kRk4) - x0).cwiseAbs().maxCoeff(), 1e-5);
  const auto shift = ConvexPotential::quadratic_from_matrix(Matrix::Identity(2, 2), vec({1, -1}));
  const Matrix moved = pushforward(shift, x0, 1, OdeMethod::kEuler);
  EXPECT_LE((moved - (x0.rowwise() + vec({1, -1}).transpose())).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Pushforward, Rk4ReachesTheMapOfTheSquare) {
  const Matrix x0 = Matrix::Constant(1, 1, 3.0);
  EXPECT_NEAR(pushforward(fixtures::square_1d(), x0, 10, OdeMethod::kRk4)(0, 0), 6.0, 1e-6);
  EXPECT_NEAR(pushforward(fixtures::square_1d(), x0, 10, OdeMethod::kEuler)(0, 0), 6.0, 1e-6);
}
