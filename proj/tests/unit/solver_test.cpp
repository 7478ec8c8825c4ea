#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "optfield/losses.hpp"
#include "optfield/oracles.hpp"
#include "optfield/solver.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::vec;

namespace {

double op_norm(const Matrix& m) { return Eigen::JacobiSVD<Matrix>(m).singularValues()(0); }

SolveConfig quick_config() {
  SolveConfig config;
  config.step_size = 0.02;
  config.max_epochs = 300;
  config.batch = 4096;
  config.eval_batch = 16384;
  config.seed = 3;
  return config;
}

}  // namespace

TEST(Solver, SelfTransportConvergesToIdentity) {
  const auto g = Distribution::standard_normal(2);
  Matrix a(2, 2);
  a << 1.3, 0.2, 0.2, 0.8;
  const auto init = ConvexPotential::quadratic_from_matrix(a, vec({0.1, -0.1}));
  const auto result = minimize(init, g, g, quick_config());
  const auto* q = result.potential.as_quadratic();
  ASSERT_NE(q, nullptr);
  EXPECT_LE(op_norm(q->hessian - Matrix::Identity(2, 2)), 0.02);
  EXPECT_LE(q->shift.norm(), 0.02);
  EXPECT_EQ(result.trace.gradient_mode, "analytic");
}

TEST(Solver, TranslationPairRecoversBures) {
  const Vector m = vec({1, -1});
  const auto p0 = Distribution::standard_normal(2);
  const auto p1 = Distribution::gaussian(m, Matrix::Identity(2, 2));
  const auto result = minimize(ConvexPotential::half_squared_norm(2), p0, p1, quick_config());
  const auto* q = result.potential.as_quadratic();
  EXPECT_LE(op_norm(q->hessian - Matrix::Identity(2, 2)), 0.02);
  EXPECT_LE((q->shift - m).norm(), 0.02 * m.norm());
}

TEST(Solver, TraceIsMonotoneInBestLossAndWritesCsv) {
  const auto g = Distribution::standard_normal(1);
  auto config = quick_config();
  config.max_epochs = 5;
  const auto result = minimize(random_quadratic(1, 2), g, g, config);
  ASSERT_FALSE(result.trace.epochs.empty());
  for (const auto& e : result.trace.epochs) EXPECT_GE(e.loss, result.trace.best_loss);
  std::ostringstream csv;
  write_trace_csv(result.trace, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epoch,loss,std_error,grad_norm,wall_time_ms");
}

TEST(Solver, IsDeterministic) {
  const auto p0 = Distribution::standard_normal(2);
  const auto p1 = Distribution::gaussian(vec({0.5, 0}), Matrix::Identity(2, 2));
  auto config = quick_config();
  config.max_epochs = 10;
  const auto a = minimize(random_max_affine(2, 3, 0.5, 1), p0, p1, config);
  const auto b = minimize(random_max_affine(2, 3, 0.5, 1), p0, p1, config);
  EXPECT_EQ(a.potential.params(), b.potential.params());
}

TEST(Solver, RequiresPathForActionMatching) {
  const auto g = Distribution::standard_normal(1);
  auto config = quick_config();
  config.loss_kind = LossKind::kAm;
  EXPECT_THROW(minimize(random_quadratic(1, 0), g, g, config), std::invalid_argument);
  config.loss_kind = LossKind::kOfm;
  EXPECT_THROW(minimize(random_quadratic(1, 0), g, g, config), std::invalid_argument);
}

TEST(Solver, SmoothedLossDoesNotIncrease) {
  const auto p0 = Distribution::standard_normal(2);
  Matrix cov(2, 2);
  cov << 1, 0, 0, 2;
  const auto p1 = Distribution::gaussian(vec({1, -1}), cov);
  const auto result = minimize(ConvexPotential::half_squared_norm(2), p0, p1, quick_config());
  const auto& epochs = result.trace.epochs;
  const std::size_t window = 20;
  ASSERT_GT(epochs.size(), 2 * window);
  auto smoothed = [&](std::size_t end) {
    double sum = 0;
    for (std::size_t i = end - window; i < end; ++i) sum += epochs[i].loss;
    return sum / window;
  };
  for (std::size_t end = window; end + 1 <= epochs.size(); ++end) {
    EXPECT_LE(smoothed(end + 1) - smoothed(end), 2 * epochs[end].std_error) << "epoch " << end;
  }
}

TEST(Solver, FlowMatchingFindsTheSameMinimizer) {
  const Vector m = vec({1, -1});
  const auto p0 = Distribution::standard_normal(2);
  const auto p1 = Distribution::gaussian(m, Matrix::Identity(2, 2));
  const auto init = ConvexPotential::half_squared_norm(2);
  auto config = quick_config();
  const auto by_ot = minimize(init, p0, p1, config);
  config.loss_kind = LossKind::kOfm;
  config.plan = PlanSpec::independent(p0, p1);
  config.seed = 4;
  const auto by_ofm = minimize(init, p0, p1, config);
  const auto a = ot_loss(by_ot.potential, p0, p1, 100000, 8);
  const auto b = ot_loss(by_ofm.potential, p0, p1, 100000, 8);
  EXPECT_LE(std::abs(a.value - b.value), 4 * combined_std_error({a.std_error, b.std_error}));
  EXPECT_LE((by_ofm.potential.as_quadratic()->shift - m).norm(), 0.05);
}
