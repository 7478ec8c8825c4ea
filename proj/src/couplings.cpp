#include "optfield/couplings.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "optfield/assignment.hpp"
#include "optfield/parallel.hpp"
#include "optfield/rng.hpp"

namespace optfield {

PlanSpec::PlanSpec(Kind kind, Distribution source, std::optional<Distribution> target,
                   std::optional<ConvexPotential> map, int batch)
    : kind_(kind),
      source_(std::move(source)),
      target_(std::move(target)),
      map_(std::move(map)),
      batch_(batch) {
  if (target_ && target_->dims() != source_.dims()) {
    throw std::invalid_argument("plan: marginal dimensions differ");
  }
  if (map_ && map_->dims() != source_.dims()) {
    throw std::invalid_argument("plan: map potential dimension differs from p0");
  }
}

PlanSpec PlanSpec::independent(Distribution p0, Distribution p1) {
  return PlanSpec(Kind::kIndependent, std::move(p0), std::move(p1), std::nullopt, 0);
}

PlanSpec PlanSpec::minibatch_ot(Distribution p0, Distribution p1, int batch) {
  if (batch < 1 || batch > kMaxMinibatch) {
    throw std::invalid_argument("minibatch plan: batch must lie in [1, 64]");
  }
  return PlanSpec(Kind::kMinibatchOt, std::move(p0), std::move(p1), std::nullopt, batch);
}

PlanSpec PlanSpec::map(Distribution p0, ConvexPotential psi) {
  return PlanSpec(Kind::kMap, std::move(p0), std::nullopt, std::move(psi), 0);
}

std::string_view PlanSpec::kind_name() const {
  switch (kind_) {
    case Kind::kIndependent: return "independent";
    case Kind::kMinibatchOt: return "minibatch_ot";
    case Kind::kMap: return "map";
  }
  return "unknown";
}

SamplePairs PlanSpec::sample_pairs(Eigen::Index n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("sample_pairs: n must be positive");
  SamplePairs pairs;
  pairs.x0 = source_.sample(n, derive_seed(seed, StreamTag::kSource));
  if (kind_ == Kind::kMap) {
    pairs.x1.resize(n, dims());
    parallel_for(n, [&](std::ptrdiff_t i) {
      pairs.x1.row(i) = map_->grad(pairs.x0.row(i).transpose()).transpose();
    });
    return pairs;
  }
  Matrix x1 = target_->sample(n, derive_seed(seed, StreamTag::kTarget));
  if (kind_ == Kind::kIndependent) {
    pairs.x1 = std::move(x1);
    return pairs;
  }
  if (batch_ > n) throw std::invalid_argument("minibatch plan: batch exceeds n");
  pairs.x1.resize(n, dims());
  const Eigen::Index groups = (n + batch_ - 1) / batch_;
  parallel_for(groups, [&](std::ptrdiff_t g) {
    const Eigen::Index begin = g * batch_;
    const Eigen::Index size = std::min<Eigen::Index>(batch_, n - begin);
    Matrix cost(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      for (Eigen::Index j = 0; j < size; ++j) {
        cost(i, j) = (pairs.x0.row(begin + i) - x1.row(begin + j)).squaredNorm();
      }
    }
    const auto match = solve_assignment(cost);
    for (Eigen::Index i = 0; i < size; ++i) pairs.x1.row(begin + i) = x1.row(begin + match[i]);
  });
  return pairs;
}

PathSpec::PathSpec(PlanSpec plan, PathShape shape, double amplitude, Vector direction)
    : plan_(std::move(plan)),
      shape_(shape),
      amplitude_(amplitude),
      direction_(std::move(direction)) {}

PathSpec PathSpec::linear(PlanSpec plan) {
  const int d = plan.dims();
  return PathSpec(std::move(plan), PathShape::kLinear, 0.0, Vector::Zero(d));
}

PathSpec PathSpec::curved_sine(PlanSpec plan, double amplitude, Vector direction) {
  if (direction.size() != plan.dims()) {
    throw std::invalid_argument("curved_sine: direction dimension differs from plan");
  }
  if (!std::isfinite(amplitude) || !direction.allFinite() || direction.norm() == 0.0) {
    throw std::invalid_argument("curved_sine: need finite amplitude and nonzero direction");
  }
  direction.normalize();
  return PathSpec(std::move(plan), PathShape::kCurvedSine, amplitude, std::move(direction));
}

std::string_view PathSpec::shape_name() const {
  return shape_ == PathShape::kLinear ? "linear" : "curved_sine";
}

Vector PathSpec::interpolate(const Vector& x0, const Vector& x1, double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t must lie in [0, 1]");
  if (t == 0.0) return x0;
  if (t == 1.0) return x1;
  Vector xt = (1.0 - t) * x0 + t * x1;
  if (shape_ == PathShape::kCurvedSine) {
    xt += amplitude_ * std::sin(std::numbers::pi * t) * (x1 - x0).norm() * direction_;
  }
  return xt;
}

}  // namespace optfield
