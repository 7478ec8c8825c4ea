#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "optfield/distributions.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

inline constexpr int kMaxMinibatch = 64;

struct SamplePairs {
  Matrix x0;  // n x D, distributed as the plan's first marginal
  Matrix x1;  // n x D
};

/// A transport plan between p0 and p1, represented by its pair sampler.
///
/// Marginal draws use the streams derive_seed(seed, kSource) and
/// derive_seed(seed, kTarget), the same streams the OT loss uses, so plans
/// and losses evaluated at one seed share their marginal samples.
class PlanSpec {
 public:
  enum class Kind { kIndependent, kMinibatchOt, kMap };

  static PlanSpec independent(Distribution p0, Distribution p1);
  /// Pairs consecutive groups of `batch` draws by an exact assignment
  /// minimizing summed squared distance. 1 <= batch <= 64.
  static PlanSpec minibatch_ot(Distribution p0, Distribution p1, int batch);
  /// x1 = grad psi(x0).
  static PlanSpec map(Distribution p0, ConvexPotential psi);

  Kind kind() const { return kind_; }
  std::string_view kind_name() const;
  int dims() const { return source_.dims(); }
  int batch() const { return batch_; }
  const Distribution& source() const { return source_; }
  /// Second marginal when known in closed form (not for map plans).
  const std::optional<Distribution>& target() const { return target_; }
  const std::optional<ConvexPotential>& map_potential() const { return map_; }

  SamplePairs sample_pairs(Eigen::Index n, std::uint64_t seed) const;

 private:
  PlanSpec(Kind kind, Distribution source, std::optional<Distribution> target,
           std::optional<ConvexPotential> map, int batch);

  Kind kind_;
  Distribution source_;
  std::optional<Distribution> target_;
  std::optional<ConvexPotential> map_;
  int batch_ = 0;
};

enum class PathShape { kLinear, kCurvedSine };

/// A plan plus an interpolation rule x_t = I(x0, x1, t); the law of x_t
/// over the plan defines the path {p_t}.
class PathSpec {
 public:
  static PathSpec linear(PlanSpec plan);
  /// x_t = (1-t) x0 + t x1 + a sin(pi t) ||x1 - x0|| c; c is normalized.
  static PathSpec curved_sine(PlanSpec plan, double amplitude, Vector direction);

  const PlanSpec& plan() const { return plan_; }
  PathShape shape() const { return shape_; }
  double amplitude() const { return amplitude_; }
  const Vector& direction() const { return direction_; }
  std::string_view shape_name() const;

  Vector interpolate(const Vector& x0, const Vector& x1, double t) const;

 private:
  PathSpec(PlanSpec plan, PathShape shape, double amplitude, Vector direction);

  PlanSpec plan_;
  PathShape shape_;
  double amplitude_ = 0.0;
  Vector direction_;
};

}  // namespace optfield
