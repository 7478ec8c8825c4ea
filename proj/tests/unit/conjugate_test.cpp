#include <cmath>

#include <gtest/gtest.h>

#include "optfield/conjugate.hpp"
#include "optfield/oracles.hpp"
#include "optfield/rng.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::scalar;
using optfield::fixtures::vec;

TEST(Conjugate, HalfSquaredNormIsSelfConjugate) {
  const auto r = conjugate(ConvexPotential::half_squared_norm(2), vec({3, 4}));
  EXPECT_NEAR(r.value, 12.5, 1e-5);  // ridge perturbs A by 1e-6
  EXPECT_TRUE(r.argmax.isApprox(vec({3, 4}), 1e-5));
}

TEST(Conjugate, SquareClosedForm) {
  // psi(x) = x^2 has psi*(y) = y^2 / 4.
  const auto r = conjugate(fixtures::square_1d(), scalar(4));
  EXPECT_NEAR(r.value, 4.0, 1e-12);
  EXPECT_NEAR(r.argmax(0), 2.0, 1e-12);
}

TEST(Conjugate, MaxAffineKinkIsCertified) {
  // |x| + x^2/2 has conjugate max(|y| - 1, 0)^2 / 2, flat on [-1, 1].
  const auto psi = fixtures::abs_plus_half_square();
  for (double y : {-3.0, -1.0, -0.4, 0.0, 0.7, 1.0, 2.5}) {
    const auto r = conjugate(psi, scalar(y));
    const double expected = 0.5 * std::pow(std::max(std::abs(y) - 1.0, 0.0), 2);
    EXPECT_NEAR(r.value, expected, 1e-14) << y;
    EXPECT_NEAR(r.argmax(0), std::copysign(std::max(std::abs(y) - 1.0, 0.0), y), 1e-14);
    EXPECT_NEAR(r.piece_weights.sum(), 1.0, 1e-14);
    EXPECT_TRUE((r.piece_weights.array() >= -1e-14).all());
    EXPECT_NEAR(psi.subgradient(r.argmax, r.piece_weights)(0), y, 1e-12);
  }
}

TEST(Conjugate, MatchesGridOnRandomMaxAffine1d) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto psi = random_max_affine(1, 5, 0.5, s);
    Rng rng = Rng::stream(s, StreamTag::kEvaluation, 0);
    const Vector y = scalar(2.0 * rng.normal());
    const auto r = conjugate(psi, y);
    const auto g = grid_conjugate(psi, y, {scalar(-20), scalar(20)}, 1000000);
    EXPECT_FALSE(g.on_boundary);
    EXPECT_NEAR(r.value, g.value, 1e-4);
    EXPECT_GE(r.value, g.value - 1e-12);  // the grid can only underestimate
  }
}

TEST(Conjugate, FenchelYoungHoldsAtArgmax) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int dims = 1 + static_cast<int>(s % 3);
    Rng rng = Rng::stream(s, StreamTag::kEvaluation, 1);
    Vector y(dims);
    for (auto& v : y) v = 1.5 * rng.normal();
    for (const auto& psi : {random_quadratic(dims, s), random_max_affine(dims, 6, 0.3, s)}) {
      const auto r = conjugate(psi, y);
      EXPECT_NEAR(psi.eval(r.argmax) + r.value, y.dot(r.argmax),
                  1e-8 * (1 + std::abs(r.value)));
      EXPECT_LE(r.grad_norm, 1e-8 * (1 + y.norm()));
    }
  }
}

TEST(Conjugate, BudgetExhaustionCarriesBestCandidate) {
  const auto psi = random_max_affine(2, 8, 0.1, 3);
  SolverSettings tight;
  tight.max_iters = 1;
  // Far from every slope the maximizer needs more than one support.
  try {
    const auto r = conjugate(psi, vec({0.01, 0.02}), tight);
    SUCCEED() << "certified on first support: " << r.value;
  } catch (const MaxItersExceeded& e) {
    EXPECT_EQ(e.best().argmax.size(), 2);
    EXPECT_TRUE(std::isfinite(e.best().value));
  }
}

TEST(Conjugate, TimeScaledPotentialBlendsWithIdentity) {
  const auto psi = random_quadratic(2, 9);
  const Vector z = vec({0.3, -0.8});
  for (double t : {0.0, 0.3, 1.0}) {
    const TimeScaledPotential phi(psi, t);
    EXPECT_NEAR(phi.eval(z), t * psi.eval(z) + (1 - t) * 0.5 * z.squaredNorm(), 1e-12);
    EXPECT_TRUE(phi.grad(z).isApprox(t * psi.grad(z) + (1 - t) * z, 1e-12));
  }
  const auto ma = random_max_affine(2, 4, 0.2, 9);
  const TimeScaledPotential phi(ma, 0.4);
  EXPECT_NEAR(phi.eval(z), 0.4 * ma.eval(z) + 0.6 * 0.5 * z.squaredNorm(), 1e-12);
  EXPECT_NEAR(phi.strong_convexity(), 0.4 * 0.2 + 0.6, 1e-15);
}

TEST(RecoverZ0, IdentityAtTimeZero) {
  EXPECT_EQ(recover_z0(random_quadratic(2, 1), 0.0, vec({5, -1})), vec({5, -1}));
  EXPECT_EQ(recover_z0(random_max_affine(2, 3, 0.1, 1), 0.0, vec({5, -1})), vec({5, -1}));
}

TEST(RecoverZ0, SquareClosedForm) {
  EXPECT_NEAR(recover_z0(fixtures::square_1d(), 0.5, scalar(3))(0), 2.0, 1e-12);
}

TEST(RecoverZ0, RoundTripsTheForwardMap) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const int dims = 1 + static_cast<int>(s % 3);
    Rng rng = Rng::stream(s, StreamTag::kEvaluation, 2);
    Vector z0(dims);
    for (auto& v : z0) v = rng.normal();
    const double t = rng.uniform();
    for (const auto& psi : {random_quadratic(dims, s), random_max_affine(dims, 4, 0.5, s)}) {
      const Vector xt = (1 - t) * z0 + t * psi.grad(z0);
      EXPECT_LE((recover_z0(psi, t, xt) - z0).norm(), 1e-8) << psi.family_name() << " t=" << t;
    }
  }
}
