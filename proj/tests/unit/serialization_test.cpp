#include <gtest/gtest.h>

#include "optfield/serialization.hpp"
#include "test_support.hpp"

using namespace optfield;
using optfield::fixtures::vec;

TEST(Serialization, PotentialRoundTrip) {
  for (const auto& psi : {random_quadratic(3, 1), random_max_affine(2, 4, 0.3, 1)}) {
    const auto back = potential_from_json(potential_to_json(psi), "potential");
    EXPECT_EQ(back.family(), psi.family());
    EXPECT_TRUE(back.params().isApprox(psi.params(), 1e-15));
    EXPECT_DOUBLE_EQ(back.eval(vec({0.2, -0.3, 0.9}).head(psi.dims())),
                     psi.eval(vec({0.2, -0.3, 0.9}).head(psi.dims())));
  }
}

TEST(Serialization, HessianFormMatchesMatrixConstructor) {
  const Json j = Json::parse(R"({"variant": "quadratic", "dims": 2,
                                 "hessian": [[2, 0.5], [0.5, 1]], "shift": [1, -1]})");
  const auto psi = potential_from_json(j, "potential");
  EXPECT_NEAR(psi.as_quadratic()->hessian(0, 1), 0.5, 1e-14);
}

TEST(Serialization, DistributionRoundTrip) {
  Matrix cov(2, 2);
  cov << 1, 0.2, 0.2, 2;
  const auto g = Distribution::gaussian(vec({1, -1}), cov);
  const auto back = distribution_from_json(distribution_to_json(g), "p0");
  EXPECT_EQ(back.sample(5, 1), g.sample(5, 1));
  const auto mix = Distribution::mixture(vec({0.25, 0.75}), {g, Distribution::standard_normal(2)});
  EXPECT_EQ(distribution_from_json(distribution_to_json(mix), "p0").sample(5, 2), mix.sample(5, 2));
}

TEST(Serialization, ErrorsNameTheField) {
  const Json bad = Json::parse(R"({"type": "gaussian", "mean": [0, 0], "covariance": [[1, 0], [0, "x"]]})");
  try {
    distribution_from_json(bad, "p0");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(e.field().find("p0.covariance"), std::string::npos) << e.field();
  }
  const Json extra = Json::parse(R"({"type": "uniform", "lower": [0], "upper": [1], "mode": 2})");
  EXPECT_THROW(distribution_from_json(extra, "p1"), ConfigError);
  const Json both = Json::parse(R"({"variant": "quadratic", "dims": 1, "factor": [[1]], "hessian": [[1]]})");
  EXPECT_THROW(potential_from_json(both, "potential"), ConfigError);
}

TEST(Serialization, RandomPotentialListsAreReproducible) {
  const Json list = Json::parse(R"([{"random": {"variant": "quadratic", "dims": 2, "count": 3, "seed": 5}},
                                    {"variant": "max_affine", "dims": 1, "strength": 0.5,
                                     "slopes": [[1], [-1]], "intercepts": [0, 0]}])");
  const auto a = potentials_from_json(list, "potentials");
  const auto b = potentials_from_json(list, "potentials");
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].params(), b[i].params());
  EXPECT_NE(a[0].params(), a[1].params());
}

TEST(Serialization, PlanAndPathRoundTrip) {
  const auto g = Distribution::standard_normal(2);
  const Json j = Json::parse(R"({"plan": {"type": "minibatch_ot", "batch": 16},
                                 "shape": "curved_sine", "amplitude": 0.5, "direction": [0, 2]})");
  const auto path = path_from_json(j, "paths[0]", g, g);
  const Json back = path_to_json(path);
  EXPECT_EQ(back["plan"]["batch"], 16);
  EXPECT_EQ(back["shape"], "curved_sine");
  EXPECT_DOUBLE_EQ(back["direction"][1].get<double>(), 1.0);
  EXPECT_THROW(plan_from_json(Json::parse(R"({"type": "minibatch_ot", "batch": 65})"), "plan", g, g),
               ConfigError);
}
