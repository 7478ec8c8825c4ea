#pragma once

#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "optfield/couplings.hpp"
#include "optfield/distributions.hpp"
#include "optfield/losses.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

using Json = nlohmann::json;

/// A malformed document; `field` is the dotted path to the offending entry
/// (e.g. "p0.covariance[1]").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Rejects keys of `object` not in `allowed`; throws ConfigError.
void require_keys_subset(const Json& object, const std::string& where,
                         std::initializer_list<const char*> allowed);

double read_number(const Json& j, const std::string& where);
std::int64_t read_integer(const Json& j, const std::string& where);
Vector read_vector(const Json& j, const std::string& where);
Matrix read_matrix(const Json& j, const std::string& where);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);

/// {"type": "gaussian", "mean": [...], "covariance": [[...]]}
/// {"type": "mixture", "weights": [...], "components": [gaussian, ...]}
/// {"type": "uniform", "lower": [...], "upper": [...]}
/// {"type": "empirical", "points": [[...]]} or {"type": "empirical", "csv": "file"}
/// Relative csv paths resolve against base_dir.
Distribution distribution_from_json(const Json& j, const std::string& where,
                                    const std::filesystem::path& base_dir = {});
Json distribution_to_json(const Distribution& d);

/// {"variant": "quadratic", "dims": D, "factor": [[...]] | "hessian": [[...]],
///  "shift": [...], "offset": c, "ridge": r}
/// {"variant": "max_affine", "dims": D, "strength": a, "slopes": [[...]],
///  "intercepts": [...]}
ConvexPotential potential_from_json(const Json& j, const std::string& where);
Json potential_to_json(const ConvexPotential& psi);

/// Expands a list whose entries are explicit potentials or
/// {"random": {"variant", "dims", "count", "seed", "scale", "pieces", "strength"}}.
std::vector<ConvexPotential> potentials_from_json(const Json& j, const std::string& where);

/// {"type": "independent"} | {"type": "minibatch_ot", "batch": b} |
/// {"type": "map", "potential": {...}}
PlanSpec plan_from_json(const Json& j, const std::string& where, const Distribution& p0,
                        const Distribution& p1);
Json plan_to_json(const PlanSpec& plan);

/// {"plan": {...}, "shape": "linear"} |
/// {"plan": {...}, "shape": "curved_sine", "amplitude": a, "direction": [...]}
PathSpec path_from_json(const Json& j, const std::string& where, const Distribution& p0,
                        const Distribution& p1);
Json path_to_json(const PathSpec& path);

/// {loss, value, std_error, n, seed, terms{name: {value, std_error}}}
Json loss_to_json(const LossEstimate& est);

}  // namespace optfield
