#include "optfield/serialization.hpp"

#include <algorithm>
#include <cmath>

namespace optfield {

namespace {

std::string at(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

std::string index(const std::string& where, std::size_t i) {
  return where + "[" + std::to_string(i) + "]";
}

const Json& member(const Json& j, const std::string& where, const char* key) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(at(where, key), "missing required field");
  return *it;
}

std::string read_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where, "expected a string");
  return j.get<std::string>();
}

void check_dims(const Json& j, const std::string& where, Eigen::Index expected) {
  if (j.contains("dims") && read_integer(j["dims"], at(where, "dims")) != expected) {
    throw ConfigError(at(where, "dims"), "does not match the parameter shapes");
  }
}

}  // namespace

void require_keys_subset(const Json& object, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  if (!object.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& item : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError(at(where, item.key()), "unknown key");
  }
}

double read_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where, "expected a finite number");
  return v;
}

std::int64_t read_integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where, "expected an integer");
  return j.get<std::int64_t>();
}

Vector read_vector(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where, "expected a non-empty array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = read_number(j[i], index(where, i));
  return v;
}

Matrix read_matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where, "expected a non-empty array of rows");
  const Vector first = read_vector(j[0], index(where, 0));
  Matrix m(j.size(), first.size());
  m.row(0) = first.transpose();
  for (std::size_t i = 1; i < j.size(); ++i) {
    const Vector r = read_vector(j[i], index(where, i));
    if (r.size() != first.size()) throw ConfigError(index(where, i), "ragged matrix row");
    m.row(i) = r.transpose();
  }
  return m;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

Distribution distribution_from_json(const Json& j, const std::string& where,
                                    const std::filesystem::path& base_dir) {
  const std::string type = read_string(member(j, where, "type"), at(where, "type"));
  try {
    if (type == "gaussian") {
      require_keys_subset(j, where, {"type", "mean", "covariance"});
      return Distribution::gaussian(read_vector(member(j, where, "mean"), at(where, "mean")),
                                    read_matrix(member(j, where, "covariance"),
                                                at(where, "covariance")));
    }
    if (type == "mixture") {
      require_keys_subset(j, where, {"type", "weights", "components"});
      const Json& comps = member(j, where, "components");
      if (!comps.is_array()) throw ConfigError(at(where, "components"), "expected an array");
      std::vector<Distribution> parts;
      for (std::size_t i = 0; i < comps.size(); ++i) {
        parts.push_back(distribution_from_json(comps[i], index(at(where, "components"), i),
                                               base_dir));
      }
      return Distribution::mixture(read_vector(member(j, where, "weights"), at(where, "weights")),
                                   parts);
    }
    if (type == "uniform") {
      require_keys_subset(j, where, {"type", "lower", "upper"});
      return Distribution::uniform(read_vector(member(j, where, "lower"), at(where, "lower")),
                                   read_vector(member(j, where, "upper"), at(where, "upper")));
    }
    if (type == "empirical") {
      require_keys_subset(j, where, {"type", "points", "csv"});
      if (j.contains("csv")) {
        std::filesystem::path file = read_string(j["csv"], at(where, "csv"));
        if (file.is_relative()) file = base_dir / file;
        return Distribution::empirical_from_csv(file);
      }
      return Distribution::empirical(read_matrix(member(j, where, "points"), at(where, "points")));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
  throw ConfigError(at(where, "type"), "unknown distribution type '" + type + "'");
}

Json distribution_to_json(const Distribution& d) {
  if (const auto* g = d.as_gaussian()) {
    return {{"type", "gaussian"}, {"mean", to_json(g->mean)}, {"covariance", to_json(g->covariance)}};
  }
  if (const auto* m = d.as_mixture()) {
    Json comps = Json::array();
    for (const auto& c : m->components) {
      comps.push_back({{"type", "gaussian"}, {"mean", to_json(c.mean)},
                       {"covariance", to_json(c.covariance)}});
    }
    return {{"type", "mixture"}, {"weights", to_json(m->weights)}, {"components", comps}};
  }
  if (const auto* u = d.as_uniform()) {
    return {{"type", "uniform"}, {"lower", to_json(u->lower)}, {"upper", to_json(u->upper)}};
  }
  return {{"type", "empirical"}, {"points", to_json(d.as_empirical()->points)}};
}

ConvexPotential potential_from_json(const Json& j, const std::string& where) {
  const std::string variant = read_string(member(j, where, "variant"), at(where, "variant"));
  try {
    if (variant == "quadratic") {
      require_keys_subset(j, where,
                          {"variant", "dims", "factor", "hessian", "shift", "offset", "ridge"});
      const double ridge = j.contains("ridge") ? read_number(j["ridge"], at(where, "ridge"))
                                               : kDefaultRidge;
      const double offset = j.contains("offset") ? read_number(j["offset"], at(where, "offset"))
                                                 : 0.0;
      if (j.contains("factor") == j.contains("hessian")) {
        throw ConfigError(where, "give exactly one of 'factor' and 'hessian'");
      }
      const bool by_factor = j.contains("factor");
      const Matrix m = read_matrix(by_factor ? j["factor"] : j["hessian"],
                                   at(where, by_factor ? "factor" : "hessian"));
      const Vector shift = j.contains("shift") ? read_vector(j["shift"], at(where, "shift"))
                                               : Vector::Zero(m.rows());
      check_dims(j, where, m.rows());
      return by_factor ? ConvexPotential::quadratic(m, shift, offset, ridge)
                       : ConvexPotential::quadratic_from_matrix(m, shift, offset, ridge);
    }
    if (variant == "max_affine") {
      require_keys_subset(j, where, {"variant", "dims", "strength", "slopes", "intercepts"});
      const double strength = j.contains("strength")
                                  ? read_number(j["strength"], at(where, "strength"))
                                  : kDefaultStrength;
      const Matrix slopes = read_matrix(member(j, where, "slopes"), at(where, "slopes"));
      const Vector intercepts =
          read_vector(member(j, where, "intercepts"), at(where, "intercepts"));
      check_dims(j, where, slopes.cols());
      return ConvexPotential::max_affine(strength, slopes, intercepts);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
  throw ConfigError(at(where, "variant"), "unknown potential variant '" + variant + "'");
}

Json potential_to_json(const ConvexPotential& psi) {
  if (const auto* q = psi.as_quadratic()) {
    return {{"variant", "quadratic"}, {"dims", psi.dims()},  {"factor", to_json(q->factor)},
            {"shift", to_json(q->shift)}, {"offset", q->offset}, {"ridge", q->ridge}};
  }
  const auto& m = *psi.as_max_affine();
  return {{"variant", "max_affine"},
          {"dims", psi.dims()},
          {"strength", m.strength},
          {"slopes", to_json(m.slopes)},
          {"intercepts", to_json(m.intercepts)}};
}

std::vector<ConvexPotential> potentials_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where, "expected a non-empty array");
  std::vector<ConvexPotential> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string item = index(where, i);
    if (!j[i].is_object() || !j[i].contains("random")) {
      out.push_back(potential_from_json(j[i], item));
      continue;
    }
    require_keys_subset(j[i], item, {"random"});
    const Json& r = j[i]["random"];
    const std::string rw = at(item, "random");
    require_keys_subset(r, rw, {"variant", "dims", "count", "seed", "scale", "pieces", "strength"});
    const std::string variant = read_string(member(r, rw, "variant"), at(rw, "variant"));
    const auto dims = read_integer(member(r, rw, "dims"), at(rw, "dims"));
    const auto count = read_integer(member(r, rw, "count"), at(rw, "count"));
    const auto seed = r.contains("seed") ? read_integer(r["seed"], at(rw, "seed")) : 0;
    if (dims < 1) throw ConfigError(at(rw, "dims"), "must be >= 1");
    if (count < 1) throw ConfigError(at(rw, "count"), "must be >= 1");
    for (std::int64_t c = 0; c < count; ++c) {
      const std::uint64_t s = static_cast<std::uint64_t>(seed) * 1000003ULL + c;
      if (variant == "quadratic") {
        const double scale = r.contains("scale") ? read_number(r["scale"], at(rw, "scale")) : 1.0;
        out.push_back(random_quadratic(static_cast<int>(dims), s, scale));
      } else if (variant == "max_affine") {
        const auto pieces = r.contains("pieces") ? read_integer(r["pieces"], at(rw, "pieces")) : 4;
        const double strength =
            r.contains("strength") ? read_number(r["strength"], at(rw, "strength")) : 1.0;
        if (pieces < 1) throw ConfigError(at(rw, "pieces"), "must be >= 1");
        if (!(strength > 0.0)) throw ConfigError(at(rw, "strength"), "must be > 0");
        out.push_back(random_max_affine(static_cast<int>(dims), static_cast<int>(pieces), strength, s));
      } else {
        throw ConfigError(at(rw, "variant"), "unknown potential variant '" + variant + "'");
      }
    }
  }
  return out;
}

PlanSpec plan_from_json(const Json& j, const std::string& where, const Distribution& p0,
                        const Distribution& p1) {
  const std::string type = read_string(member(j, where, "type"), at(where, "type"));
  try {
    if (type == "independent") {
      require_keys_subset(j, where, {"type"});
      return PlanSpec::independent(p0, p1);
    }
    if (type == "minibatch_ot") {
      require_keys_subset(j, where, {"type", "batch"});
      const auto batch = read_integer(member(j, where, "batch"), at(where, "batch"));
      return PlanSpec::minibatch_ot(p0, p1, static_cast<int>(batch));
    }
    if (type == "map") {
      require_keys_subset(j, where, {"type", "potential"});
      return PlanSpec::map(p0, potential_from_json(member(j, where, "potential"),
                                                   at(where, "potential")));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
  throw ConfigError(at(where, "type"), "unknown plan type '" + type + "'");
}

Json plan_to_json(const PlanSpec& plan) {
  Json out = {{"type", plan.kind_name()}};
  if (plan.kind() == PlanSpec::Kind::kMinibatchOt) out["batch"] = plan.batch();
  if (plan.map_potential()) out["potential"] = potential_to_json(*plan.map_potential());
  return out;
}

PathSpec path_from_json(const Json& j, const std::string& where, const Distribution& p0,
                        const Distribution& p1) {
  require_keys_subset(j, where, {"plan", "shape", "amplitude", "direction"});
  PlanSpec plan = plan_from_json(member(j, where, "plan"), at(where, "plan"), p0, p1);
  const std::string shape =
      j.contains("shape") ? read_string(j["shape"], at(where, "shape")) : "linear";
  if (shape == "linear") {
    if (j.contains("amplitude") || j.contains("direction")) {
      throw ConfigError(where, "linear paths take no amplitude/direction");
    }
    return PathSpec::linear(std::move(plan));
  }
  if (shape == "curved_sine") {
    try {
      return PathSpec::curved_sine(
          std::move(plan), read_number(member(j, where, "amplitude"), at(where, "amplitude")),
          read_vector(member(j, where, "direction"), at(where, "direction")));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where, e.what());
    }
  }
  throw ConfigError(at(where, "shape"), "unknown path shape '" + shape + "'");
}

Json path_to_json(const PathSpec& path) {
  Json out = {{"plan", plan_to_json(path.plan())}, {"shape", path.shape_name()}};
  if (path.shape() == PathShape::kCurvedSine) {
    out["amplitude"] = path.amplitude();
    out["direction"] = to_json(path.direction());
  }
  return out;
}

Json loss_to_json(const LossEstimate& est) {
  Json terms = Json::object();
  for (const auto& [name, t] : est.terms) {
    terms[name] = {{"value", t.value}, {"std_error", t.std_error}};
  }
  return {{"loss", est.loss},           {"value", est.value}, {"std_error", est.std_error},
          {"n", est.n_samples},         {"seed", est.seed},   {"terms", terms},
          {"conjugate_warnings", est.conjugate_warnings}};
}

}  // namespace optfield
