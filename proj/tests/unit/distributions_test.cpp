#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "optfield/distributions.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::vec;

TEST(Distributions, SamplingIsAPureFunctionOfSeed) {
  const auto g = Distribution::standard_normal(2);
  const Matrix a = g.sample(3, 7);
  const Matrix b = g.sample(3, 7);
  EXPECT_EQ(a.rows(), 3);
  EXPECT_EQ(a.cols(), 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, g.sample(3, 8));
}

TEST(Distributions, PrefixOfALargerDrawIsTheSmallerDraw) {
  const auto g = Distribution::standard_normal(3);
  const Matrix small = g.sample(10, 42);
  const Matrix large = g.sample(1000, 42);
  EXPECT_EQ(small, large.topRows(10));
}

TEST(Distributions, UniformMeanWithinThreeStandardErrors) {
  const auto u = Distribution::uniform(vec({0, 0}), vec({1, 1}));
  const Eigen::Index n = 100000;
  const Vector mean = u.sample(n, 3).colwise().mean();
  const double se = std::sqrt(1.0 / 12.0 / n);
  EXPECT_NEAR(mean(0), 0.5, 3 * se);
  EXPECT_NEAR(mean(1), 0.5, 3 * se);
  EXPECT_TRUE(((u.sample(n, 3).array() >= 0.0) && (u.sample(n, 3).array() < 1.0)).all());
}

TEST(Distributions, MixtureMeanIsWeightedComponentMean) {
  const auto left = Distribution::gaussian(vec({-2, 0}), Matrix::Identity(2, 2));
  const auto right = Distribution::gaussian(vec({2, 0}), Matrix::Identity(2, 2));
  const auto mix = Distribution::mixture(vec({0.5, 0.5}), {left, right});
  const Eigen::Index n = 100000;
  const Matrix x = mix.sample(n, 11);
  const Vector mean = x.colwise().mean();
  // Var(x_0) = 1 + 4 for the symmetric two-component mixture.
  EXPECT_NEAR(mean(0), 0.0, 3 * std::sqrt(5.0 / n));
  EXPECT_NEAR(mean(1), 0.0, 3 * std::sqrt(1.0 / n));
  EXPECT_TRUE(mix.mean().isZero(1e-15));
}

TEST(Distributions, SecondMomentClosedForms) {
  EXPECT_DOUBLE_EQ(Distribution::standard_normal(4).second_moment(), 4.0);
  Matrix cov(2, 2);
  cov << 2.0, 0.3, 0.3, 1.0;
  EXPECT_DOUBLE_EQ(Distribution::gaussian(vec({1, -2}), cov).second_moment(), 5.0 + 3.0);
  Matrix pts(2, 2);
  pts << 1, 0, 0, 2;
  EXPECT_DOUBLE_EQ(Distribution::empirical(pts).second_moment(), 2.5);
}

TEST(Distributions, SampleSecondMomentMatchesClosedFormForEveryVariant) {
  Matrix cov(2, 2);
  cov << 1.5, -0.4, -0.4, 0.7;
  Matrix pts(3, 2);
  pts << 1, 0, 0, 2, -1, 1;
  const std::vector<Distribution> all = {
      Distribution::gaussian(vec({0.5, -1}), cov),
      Distribution::mixture(vec({0.3, 0.7}),
                            {Distribution::gaussian(vec({-2, 0}), Matrix::Identity(2, 2)),
                             Distribution::gaussian(vec({1, 1}), cov)}),
      Distribution::uniform(vec({-1, 0}), vec({2, 3})),
      Distribution::empirical(pts),
  };
  const Eigen::Index n = 1000000;
  for (const auto& d : all) {
    const Vector sq = d.sample(n, 5).rowwise().squaredNorm();
    const double mean = sq.mean();
    const double se = std::sqrt((sq.array() - mean).square().sum() / (n - 1) / n);
    EXPECT_NEAR(mean, d.second_moment(), 4 * se) << d.kind_name();
  }
}

TEST(Distributions, GaussianRejectsBadCovariance) {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(Distribution::gaussian(Vector::Zero(2), asym), std::invalid_argument);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(Distribution::gaussian(Vector::Zero(2), indefinite), std::invalid_argument);
  EXPECT_THROW(Distribution::gaussian(Vector::Zero(3), Matrix::Identity(2, 2)),
               std::invalid_argument);
}

TEST(Distributions, EmpiricalFromCsv) {
  const auto path = std::filesystem::temp_directory_path() / "optfield_points.csv";
  {
    std::ofstream out(path);
    out << "1.0,0\n0,2.0\n";
  }
  const auto d = Distribution::empirical_from_csv(path);
  EXPECT_EQ(d.dims(), 2);
  EXPECT_DOUBLE_EQ(d.second_moment(), 2.5);
  {
    std::ofstream out(path);
    out << "1.0,0\n0\n";
  }
  EXPECT_THROW(Distribution::empirical_from_csv(path), std::invalid_argument);
  std::filesystem::remove(path);
}
