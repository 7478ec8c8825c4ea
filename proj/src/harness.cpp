#include "optfield/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "optfield/losses.hpp"
#include "optfield/optimal_fields.hpp"
#include "optfield/oracles.hpp"
#include "optfield/parallel.hpp"
#include "optfield/rng.hpp"
#include "optfield/solver.hpp"

namespace optfield {

namespace fs = std::filesystem;

namespace {

struct Tolerances {
  double sigma = 4.0;
  double bracket_relative = 1e-9;
  double bracket_audit = 1e-3;
  double map_relative = 0.02;
  double shift_absolute = 0.05;
  double w2_relative = 0.02;
  double ode_relative = 1e-6;
  double push_mean_relative = 0.03;
  double push_cov_relative = 0.05;
};

struct BracketSettings {
  Eigen::Index points = 50;
  double t_min = 0.05;
  double t_max = 0.95;
  double x_scale = 2.0;
  double fd_step_x = 1e-5;
  double fd_step_t = 1e-4;
};

struct PushSettings {
  Eigen::Index n = 10000;
  int steps = 10;
  OdeMethod method = OdeMethod::kRk4;
};

/// A fully parsed and validated configuration.
struct Experiment {
  std::string name;
  fs::path base_dir;
  std::optional<Distribution> p0;
  std::optional<Distribution> p1;
  std::vector<ConvexPotential> potentials;
  std::optional<PlanSpec> plan;
  std::vector<PathSpec> paths;
  Eigen::Index n = 100000;
  std::uint64_t seed = 0;
  std::string out;
  Tolerances tol;
  SolverSettings conjugate;
  BracketSettings bracket;
  PushSettings push;
  SolveConfig solver;
  Eigen::Index final_n = 200000;
  int threads = 0;
};

/// Collects named pass/fail checks for the report.
class Checks {
 public:
  void add(const std::string& name, double value, double threshold, bool pass) {
    Json entry = {{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}};
    entries_.push_back(std::move(entry));
    if (!pass && first_failure_.empty()) first_failure_ = name;
    all_pass_ = all_pass_ && pass;
  }
  /// value <= threshold
  void at_most(const std::string& name, double value, double threshold) {
    add(name, value, threshold, std::isfinite(value) && value <= threshold);
  }

  bool all_pass() const { return all_pass_; }
  const std::string& first_failure() const { return first_failure_; }
  Json to_json() const { return entries_; }

 private:
  Json entries_ = Json::array();
  bool all_pass_ = true;
  std::string first_failure_;
};

std::string field(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double number_or(const Json& j, const char* key, const std::string& where, double fallback) {
  return j.contains(key) ? read_number(j[key], field(where, key)) : fallback;
}

std::int64_t integer_or(const Json& j, const char* key, const std::string& where,
                        std::int64_t fallback) {
  return j.contains(key) ? read_integer(j[key], field(where, key)) : fallback;
}

std::int64_t positive(std::int64_t v, const std::string& where, std::int64_t min = 1) {
  if (v < min) throw ConfigError(where, "must be >= " + std::to_string(min));
  return v;
}

double positive_number(double v, const std::string& where) {
  if (!(v > 0.0)) throw ConfigError(where, "must be > 0");
  return v;
}

Tolerances parse_tolerances(const Json& j) {
  require_keys_subset(j, "tolerances",
                      {"sigma", "bracket_relative", "bracket_audit", "map_relative",
                       "shift_absolute", "w2_relative", "ode_relative", "push_mean_relative",
                       "push_cov_relative"});
  Tolerances t;
  const std::string w = "tolerances";
  t.sigma = positive_number(number_or(j, "sigma", w, t.sigma), field(w, "sigma"));
  t.bracket_relative = number_or(j, "bracket_relative", w, t.bracket_relative);
  t.bracket_audit = number_or(j, "bracket_audit", w, t.bracket_audit);
  t.map_relative = number_or(j, "map_relative", w, t.map_relative);
  t.shift_absolute = number_or(j, "shift_absolute", w, t.shift_absolute);
  t.w2_relative = number_or(j, "w2_relative", w, t.w2_relative);
  t.ode_relative = number_or(j, "ode_relative", w, t.ode_relative);
  t.push_mean_relative = number_or(j, "push_mean_relative", w, t.push_mean_relative);
  t.push_cov_relative = number_or(j, "push_cov_relative", w, t.push_cov_relative);
  return t;
}

LossKind parse_loss_kind(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where, "expected a string");
  const auto s = j.get<std::string>();
  if (s == "ot") return LossKind::kOt;
  if (s == "ofm") return LossKind::kOfm;
  if (s == "am") return LossKind::kAm;
  throw ConfigError(where, "unknown loss '" + s + "' (expected ot, ofm or am)");
}

Experiment parse_experiment(const Json& config, const fs::path& base_dir) {
  require_keys_subset(config, "",
                      {"experiment", "p0", "p1", "potential", "potentials", "potential_file",
                       "plan", "paths", "n", "seed", "out", "tolerances", "solver", "conjugate",
                       "bracket", "push", "threads"});
  Experiment e;
  e.base_dir = base_dir;
  if (config.contains("experiment")) {
    if (!config["experiment"].is_string()) throw ConfigError("experiment", "expected a string");
    e.name = config["experiment"].get<std::string>();
  }
  if (config.contains("p0")) e.p0 = distribution_from_json(config["p0"], "p0", base_dir);
  if (config.contains("p1")) e.p1 = distribution_from_json(config["p1"], "p1", base_dir);
  if (e.p0 && e.p1 && e.p0->dims() != e.p1->dims()) {
    throw ConfigError("p1", "dimension differs from p0");
  }

  const int sources = config.contains("potential") + config.contains("potentials") +
                      config.contains("potential_file");
  if (sources > 1) {
    throw ConfigError("potential", "give only one of potential, potentials, potential_file");
  }
  if (config.contains("potential")) {
    e.potentials.push_back(potential_from_json(config["potential"], "potential"));
  } else if (config.contains("potentials")) {
    e.potentials = potentials_from_json(config["potentials"], "potentials");
  } else if (config.contains("potential_file")) {
    if (!config["potential_file"].is_string()) {
      throw ConfigError("potential_file", "expected a string");
    }
    fs::path file = config["potential_file"].get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    std::ifstream in(file);
    if (!in) throw ConfigError("potential_file", "cannot open " + file.string());
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::parse_error& err) {
      throw ConfigError("potential_file", err.what());
    }
    e.potentials.push_back(potential_from_json(doc, "potential_file"));
  }
  if (e.p0) {
    for (std::size_t i = 0; i < e.potentials.size(); ++i) {
      if (e.potentials[i].dims() != e.p0->dims()) {
        throw ConfigError("potentials[" + std::to_string(i) + "]", "dimension differs from p0");
      }
    }
  }

  const bool have_pair = e.p0 && e.p1;
  if (config.contains("plan")) {
    if (!e.p0) throw ConfigError("plan", "needs p0 (and p1 unless type is map)");
    const Distribution& p1 = e.p1 ? *e.p1 : *e.p0;
    if (!e.p1 && config["plan"].value("type", "") != "map") {
      throw ConfigError("plan", "needs p1");
    }
    e.plan = plan_from_json(config["plan"], "plan", *e.p0, p1);
  }
  if (config.contains("paths")) {
    if (!have_pair) throw ConfigError("paths", "needs p0 and p1");
    const Json& paths = config["paths"];
    if (!paths.is_array() || paths.empty()) throw ConfigError("paths", "expected a non-empty array");
    for (std::size_t i = 0; i < paths.size(); ++i) {
      e.paths.push_back(
          path_from_json(paths[i], "paths[" + std::to_string(i) + "]", *e.p0, *e.p1));
    }
  }

  e.n = positive(integer_or(config, "n", "", e.n), "n", 2);
  e.seed = static_cast<std::uint64_t>(positive(integer_or(config, "seed", "", 0), "seed", 0));
  if (config.contains("out")) {
    if (!config["out"].is_string()) throw ConfigError("out", "expected a string");
    e.out = config["out"].get<std::string>();
  }
  e.threads = static_cast<int>(positive(integer_or(config, "threads", "", 0), "threads", 0));
  if (config.contains("tolerances")) e.tol = parse_tolerances(config["tolerances"]);

  if (config.contains("conjugate")) {
    const Json& c = config["conjugate"];
    require_keys_subset(c, "conjugate", {"tol", "max_iters"});
    e.conjugate.tol = positive_number(number_or(c, "tol", "conjugate", e.conjugate.tol),
                                      "conjugate.tol");
    e.conjugate.max_iters = static_cast<int>(
        positive(integer_or(c, "max_iters", "conjugate", e.conjugate.max_iters),
                 "conjugate.max_iters"));
  }

  if (config.contains("bracket")) {
    const Json& b = config["bracket"];
    const std::string w = "bracket";
    require_keys_subset(b, w, {"points", "t_min", "t_max", "x_scale", "fd_step_x", "fd_step_t"});
    auto& s = e.bracket;
    s.points = positive(integer_or(b, "points", w, s.points), field(w, "points"));
    s.t_min = number_or(b, "t_min", w, s.t_min);
    s.t_max = number_or(b, "t_max", w, s.t_max);
    s.x_scale = positive_number(number_or(b, "x_scale", w, s.x_scale), field(w, "x_scale"));
    s.fd_step_x = positive_number(number_or(b, "fd_step_x", w, s.fd_step_x), field(w, "fd_step_x"));
    s.fd_step_t = positive_number(number_or(b, "fd_step_t", w, s.fd_step_t), field(w, "fd_step_t"));
    if (!(s.t_min - s.fd_step_t >= 0.0 && s.t_min < s.t_max && s.t_max + s.fd_step_t <= 1.0)) {
      throw ConfigError(w, "need fd_step_t <= t_min < t_max <= 1 - fd_step_t");
    }
  }

  if (config.contains("push")) {
    const Json& p = config["push"];
    const std::string w = "push";
    require_keys_subset(p, w, {"n", "steps", "method"});
    e.push.n = positive(integer_or(p, "n", w, e.push.n), field(w, "n"));
    e.push.steps = static_cast<int>(positive(integer_or(p, "steps", w, e.push.steps), field(w, "steps")));
    if (p.contains("method")) {
      const Json& m = p["method"];
      const std::string method = m.is_string() ? m.get<std::string>() : "";
      if (method == "euler") {
        e.push.method = OdeMethod::kEuler;
      } else if (method == "rk4") {
        e.push.method = OdeMethod::kRk4;
      } else {
        throw ConfigError(field(w, "method"), "expected \"euler\" or \"rk4\"");
      }
    }
  }

  if (config.contains("solver")) {
    const Json& s = config["solver"];
    const std::string w = "solver";
    require_keys_subset(s, w,
                        {"loss", "path", "step_size", "max_epochs", "batch", "eval_batch",
                         "grad_tol", "seed", "beta1", "beta2", "stabilizer", "fd_step",
                         "gradient_check_tol", "final_n"});
    auto& c = e.solver;
    if (s.contains("loss")) c.loss_kind = parse_loss_kind(s["loss"], field(w, "loss"));
    c.step_size = positive_number(number_or(s, "step_size", w, c.step_size), field(w, "step_size"));
    c.max_epochs = static_cast<int>(positive(integer_or(s, "max_epochs", w, c.max_epochs),
                                             field(w, "max_epochs")));
    c.batch = positive(integer_or(s, "batch", w, c.batch), field(w, "batch"), 2);
    c.eval_batch = positive(integer_or(s, "eval_batch", w, c.eval_batch), field(w, "eval_batch"), 2);
    c.grad_tol = number_or(s, "grad_tol", w, c.grad_tol);
    c.seed = static_cast<std::uint64_t>(
        positive(integer_or(s, "seed", w, static_cast<std::int64_t>(e.seed)), field(w, "seed"), 0));
    c.beta1 = number_or(s, "beta1", w, c.beta1);
    c.beta2 = number_or(s, "beta2", w, c.beta2);
    if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) throw ConfigError(field(w, "beta1"), "must lie in (0, 1)");
    if (!(c.beta2 > 0.0 && c.beta2 < 1.0)) throw ConfigError(field(w, "beta2"), "must lie in (0, 1)");
    c.stabilizer = positive_number(number_or(s, "stabilizer", w, c.stabilizer), field(w, "stabilizer"));
    c.fd_step = positive_number(number_or(s, "fd_step", w, c.fd_step), field(w, "fd_step"));
    c.gradient_check_tol = number_or(s, "gradient_check_tol", w, c.gradient_check_tol);
    e.final_n = positive(integer_or(s, "final_n", w, e.final_n), field(w, "final_n"), 2);
    if (s.contains("path")) {
      if (!have_pair) throw ConfigError(field(w, "path"), "needs p0 and p1");
      c.path = path_from_json(s["path"], field(w, "path"), *e.p0, *e.p1);
    }
    if (c.loss_kind == LossKind::kAm && !c.path) {
      throw ConfigError(field(w, "path"), "required when loss is am");
    }
    if (c.loss_kind == LossKind::kOfm) {
      if (!e.plan) throw ConfigError("plan", "required when solver.loss is ofm");
      c.plan = e.plan;
    }
  }
  e.solver.conjugate = e.conjugate;
  return e;
}

void require(bool present, const char* key, std::string_view subcommand) {
  if (!present) {
    throw ConfigError(key, "required by " + std::string(subcommand));
  }
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills `results` and `checks`.

void verify_bracket(const Experiment& e, Json& results, Checks& checks) {
  require(!e.potentials.empty(), "potentials", "verify-bracket");
  double max_relative = 0.0;
  double max_abs = 0.0;
  double max_audit = 0.0;
  Eigen::Index audited = 0;
  Eigen::Index skipped = 0;
  Json per_potential = Json::array();
  const auto& b = e.bracket;
  for (std::size_t p = 0; p < e.potentials.size(); ++p) {
    const ConvexPotential& psi = e.potentials[p];
    double pot_relative = 0.0;
    double pot_audit = 0.0;
    for (Eigen::Index k = 0; k < b.points; ++k) {
      Rng rng = Rng::stream(e.seed, StreamTag::kSample, p * 1000003ULL + k);
      const double t = b.t_min + (b.t_max - b.t_min) * rng.uniform();
      Vector x(psi.dims());
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = b.x_scale * rng.normal();
      const FieldEval f = evaluate_field(psi, t, x, e.conjugate);
      const double value = 0.5 * f.velocity.squaredNorm() + f.s_dt;
      max_abs = std::max(max_abs, std::abs(value));
      pot_relative = std::max(pot_relative, std::abs(value) / (1.0 + f.velocity.squaredNorm()));
      const auto audit = audited_bracket(psi, t, x, b.fd_step_x, b.fd_step_t, e.conjugate);
      if (audit) {
        ++audited;
        pot_audit = std::max(pot_audit, std::abs(*audit));
      } else {
        ++skipped;
      }
    }
    max_relative = std::max(max_relative, pot_relative);
    max_audit = std::max(max_audit, pot_audit);
    per_potential.push_back({{"family", psi.family_name()},
                             {"dims", psi.dims()},
                             {"max_bracket_relative", pot_relative},
                             {"max_audited_bracket", pot_audit}});
  }
  results["max_abs_bracket"] = max_abs;
  results["max_bracket_relative"] = max_relative;
  results["max_audited_bracket"] = max_audit;
  results["audited_points"] = audited;
  results["skipped_kink_crossings"] = skipped;
  results["potentials"] = per_potential;
  checks.at_most("bracket_relative", max_relative, e.tol.bracket_relative);
  checks.at_most("audited_bracket", max_audit, e.tol.bracket_audit);
}

void verify_theorem(const Experiment& e, Json& results, Checks& checks) {
  require(e.p0.has_value(), "p0", "verify-theorem");
  require(e.p1.has_value(), "p1", "verify-theorem");
  require(!e.potentials.empty(), "potentials", "verify-theorem");
  require(!e.paths.empty(), "paths", "verify-theorem");
  const double constant = am_constant(*e.p0, *e.p1);
  results["am_constant"] = constant;
  Json rows = Json::array();
  for (std::size_t p = 0; p < e.potentials.size(); ++p) {
    const ConvexPotential& psi = e.potentials[p];
    const LossEstimate ot = ot_loss(psi, *e.p0, *e.p1, e.n, e.seed, e.conjugate);
    Json row = {{"potential", potential_to_json(psi)}, {"ot_loss", loss_to_json(ot)}};
    Json per_path = Json::array();
    std::vector<LossEstimate> am;
    for (std::size_t k = 0; k < e.paths.size(); ++k) {
      am.push_back(am_loss(psi, e.paths[k], e.n, e.seed, e.conjugate));
      const double discrepancy = am.back().value - ot.value - constant;
      const double se = combined_std_error({am.back().std_error, ot.std_error});
      const std::string name =
          "theorem[psi=" + std::to_string(p) + ",path=" + std::to_string(k) + "]";
      checks.add(name, std::abs(discrepancy), e.tol.sigma * se,
                 std::abs(discrepancy) <= e.tol.sigma * se);
      per_path.push_back({{"path", path_to_json(e.paths[k])},
                          {"am_loss", loss_to_json(am.back())},
                          {"discrepancy", discrepancy},
                          {"abs_discrepancy", std::abs(discrepancy)},
                          {"combined_std_error", se},
                          {"pass", std::abs(discrepancy) <= e.tol.sigma * se}});
    }
    for (std::size_t a = 0; a < am.size(); ++a) {
      for (std::size_t c = a + 1; c < am.size(); ++c) {
        const double gap = std::abs(am[a].value - am[c].value);
        const double se = combined_std_error({am[a].std_error, am[c].std_error});
        checks.add("path_independence[psi=" + std::to_string(p) + ",paths=" + std::to_string(a) +
                       "," + std::to_string(c) + "]",
                   gap, e.tol.sigma * se, gap <= e.tol.sigma * se);
      }
    }
    row["paths"] = per_path;
    rows.push_back(row);
  }
  results["potentials"] = rows;
}

void verify_ofm_relation(const Experiment& e, Json& results, Checks& checks) {
  require(e.p0.has_value(), "p0", "verify-ofm-relation");
  require(e.p1.has_value(), "p1", "verify-ofm-relation");
  require(e.plan.has_value(), "plan", "verify-ofm-relation");
  require(!e.potentials.empty(), "potentials", "verify-ofm-relation");
  struct Row {
    double constant;
    double se;
  };
  std::vector<Row> consts;
  Json rows = Json::array();
  for (const ConvexPotential& psi : e.potentials) {
    const LossEstimate ofm = ofm_loss(psi, *e.plan, e.n, e.seed, e.conjugate);
    const LossEstimate ot = ot_loss(psi, *e.p0, *e.p1, e.n, e.seed, e.conjugate);
    const double c = ofm.value - 2.0 * ot.value;
    const double se = combined_std_error({ofm.std_error, 2.0 * ot.std_error});
    consts.push_back({c, se});
    rows.push_back({{"potential", potential_to_json(psi)},
                    {"ofm_loss", loss_to_json(ofm)},
                    {"ot_loss", loss_to_json(ot)},
                    {"constant", c},
                    {"constant_std_error", se}});
  }
  for (std::size_t a = 0; a < consts.size(); ++a) {
    for (std::size_t b = a + 1; b < consts.size(); ++b) {
      const double gap = std::abs(consts[a].constant - consts[b].constant);
      const double se = combined_std_error({consts[a].se, consts[b].se});
      checks.add("ofm_constant_agreement[" + std::to_string(a) + "," + std::to_string(b) + "]",
                 gap, e.tol.sigma * se, gap <= e.tol.sigma * se);
    }
  }
  results["plan"] = plan_to_json(*e.plan);
  results["potentials"] = rows;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

void solve_ot(const Experiment& e, const fs::path& out_dir, Json& results, Checks& checks) {
  require(e.p0.has_value(), "p0", "solve-ot");
  require(e.p1.has_value(), "p1", "solve-ot");
  require(e.potentials.size() == 1, "potential", "solve-ot");
  const SolveResult solved = minimize(e.potentials.front(), *e.p0, *e.p1, e.solver);
  const ConvexPotential& psi = solved.potential;

  write_text(out_dir / "potential.json", potential_to_json(psi).dump(2) + "\n");
  {
    std::ofstream trace(out_dir / "trace.csv");
    write_trace_csv(solved.trace, trace);
  }

  const LossEstimate ot = ot_loss(psi, *e.p0, *e.p1, e.final_n, e.seed, e.conjugate);
  const LossEstimate w2 = w2_estimate(psi, *e.p0, *e.p1, e.final_n, e.seed, e.conjugate);
  results["loss"] = loss_kind_name(e.solver.loss_kind);
  results["potential"] = potential_to_json(psi);
  results["final_ot_loss"] = loss_to_json(ot);
  results["w2_estimate"] = loss_to_json(w2);
  results["best_epoch"] = solved.trace.best_epoch;
  results["epochs_run"] = solved.trace.epochs.size();
  results["converged"] = solved.trace.converged;
  results["gradient_mode"] = solved.trace.gradient_mode;
  results["gradient_check_error"] = solved.trace.gradient_check_error;
  results["conjugate_failures"] = solved.trace.conjugate_failures;
  checks.add("finite_loss", ot.value, 0.0, std::isfinite(ot.value));

  if (e.p0->as_gaussian() && e.p1->as_gaussian()) {
    const GaussianOTSolution oracle = bures_map(*e.p0, *e.p1);
    const double w2_rel = std::abs(w2.value - oracle.w2_squared) / oracle.w2_squared;
    results["bures"] = {{"linear_map", to_json(oracle.linear_map)},
                        {"shift", to_json(oracle.shift)},
                        {"w2_squared", oracle.w2_squared}};
    if (oracle.w2_squared > 0.0) {
      checks.at_most("w2_relative_error", w2_rel, e.tol.w2_relative);
    } else {
      checks.at_most("w2_absolute_error", std::abs(w2.value), e.tol.w2_relative);
    }
    if (const auto* q = psi.as_quadratic()) {
      const Matrix diff = q->hessian - oracle.linear_map;
      const double op = Eigen::JacobiSVD<Matrix>(diff).singularValues()(0);
      const double ref = Eigen::JacobiSVD<Matrix>(oracle.linear_map).singularValues()(0);
      const double shift_err = (q->shift - oracle.shift).norm();
      results["map_relative_error"] = op / ref;
      results["shift_error"] = shift_err;
      checks.at_most("map_relative_error", op / ref, e.tol.map_relative);
      checks.at_most("shift_error", shift_err, e.tol.shift_absolute);
    }
  }
}

void push_samples(const Experiment& e, const fs::path& out_dir, Json& results, Checks& checks) {
  require(e.p0.has_value(), "p0", "push-samples");
  require(e.potentials.size() == 1, "potential", "push-samples");
  const ConvexPotential& psi = e.potentials.front();
  const Matrix x0 = e.p0->sample(e.push.n, derive_seed(e.seed, StreamTag::kSource));
  const Matrix ode = pushforward(psi, x0, e.push.steps, e.push.method, e.conjugate);
  Matrix mapped(x0.rows(), x0.cols());
  double max_rel = 0.0;
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    mapped.row(i) = psi.grad(x0.row(i).transpose()).transpose();
    const double rel = (ode.row(i) - mapped.row(i)).norm() / std::max(1.0, mapped.row(i).norm());
    max_rel = std::max(max_rel, rel);
  }
  {
    std::ofstream csv(out_dir / "samples.csv");
    const auto d = x0.cols();
    for (const char* prefix : {"x0_", "x1_ode_", "x1_map_"}) {
      for (Eigen::Index j = 0; j < d; ++j) {
        csv << (prefix == std::string("x0_") && j == 0 ? "" : ",") << prefix << j;
      }
    }
    csv << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      for (const Matrix* m : std::initializer_list<const Matrix*>{&x0, &ode, &mapped}) {
        for (Eigen::Index j = 0; j < d; ++j) {
          csv << (m == &x0 && j == 0 ? "" : ",") << (*m)(i, j);
        }
      }
      csv << '\n';
    }
  }
  results["n"] = e.push.n;
  results["steps"] = e.push.steps;
  results["method"] = e.push.method == OdeMethod::kRk4 ? "rk4" : "euler";
  results["max_relative_ode_error"] = max_rel;
  checks.at_most("ode_relative_error", max_rel, e.tol.ode_relative);

  const Vector mean = ode.colwise().mean().transpose();
  const Matrix centered = ode.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(ode.rows() - 1);
  results["pushed_mean"] = to_json(mean);
  results["pushed_covariance"] = to_json(cov);
  if (e.p1) {
    const Vector target_mean = e.p1->mean();
    const Vector target_var = e.p1->covariance().diagonal();
    const double mean_rel = (mean - target_mean).norm() / std::max(1.0, target_mean.norm());
    const double cov_rel =
        ((cov.diagonal() - target_var).cwiseAbs().array() / target_var.array()).maxCoeff();
    results["mean_relative_error"] = mean_rel;
    results["covariance_diagonal_relative_error"] = cov_rel;
    checks.at_most("push_mean_relative_error", mean_rel, e.tol.push_mean_relative);
    checks.at_most("push_covariance_relative_error", cov_rel, e.tol.push_cov_relative);
  }
}

Json gaussian_json(std::vector<double> mean, std::vector<std::vector<double>> cov) {
  return {{"type", "gaussian"}, {"mean", mean}, {"covariance", cov}};
}

Json default_pair_source() { return gaussian_json({0.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}}); }
Json default_pair_target() { return gaussian_json({1.0, -1.0}, {{1.0, 0.0}, {0.0, 2.0}}); }

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"verify-bracket", "verify-theorem",
                                                 "verify-ofm-relation", "solve-ot",
                                                 "push-samples"};
  return names;
}

Json default_config(std::string_view subcommand) {
  auto random_quadratics = [](int count) {
    return Json{{"random", {{"variant", "quadratic"}, {"dims", 2}, {"count", count}, {"seed", 11}}}};
  };
  if (subcommand == "verify-bracket") {
    auto random = [](const char* variant, int dims, int count, int seed) {
      Json spec = {{"variant", variant}, {"dims", dims}, {"count", count}, {"seed", seed}};
      if (std::string_view(variant) == "max_affine") {
        spec["pieces"] = 4;
        spec["strength"] = kDefaultStrength;
      }
      return Json{{"random", spec}};
    };
    return {{"experiment", "bracket-audit"},
            {"potentials",
             {random("quadratic", 1, 67, 1), random("quadratic", 2, 67, 2),
              random("quadratic", 5, 66, 3), random("max_affine", 1, 100, 4),
              random("max_affine", 2, 100, 5)}},
            {"bracket", {{"points", 50}, {"t_min", 0.05}, {"t_max", 0.95}}},
            {"seed", 7}};
  }
  if (subcommand == "verify-theorem") {
    return {{"experiment", "am-equals-ot-up-to-constant"},
            {"p0", default_pair_source()},
            {"p1", default_pair_target()},
            {"potentials", {random_quadratics(10)}},
            {"paths",
             {{{"plan", {{"type", "independent"}}}, {"shape", "linear"}},
              {{"plan", {{"type", "minibatch_ot"}, {"batch", 32}}}, {"shape", "linear"}},
              {{"plan", {{"type", "independent"}}},
               {"shape", "curved_sine"},
               {"amplitude", 0.5},
               {"direction", {0.0, 1.0}}}}},
            {"n", 100000},
            {"seed", 1}};
  }
  if (subcommand == "verify-ofm-relation") {
    return {{"experiment", "ofm-constant"},
            {"p0", default_pair_source()},
            {"p1", default_pair_target()},
            {"potentials", {random_quadratics(3)}},
            {"plan", {{"type", "independent"}}},
            {"n", 100000},
            {"seed", 1}};
  }
  if (subcommand == "solve-ot") {
    return {{"experiment", "gaussian-ot"},
            {"p0", default_pair_source()},
            {"p1", default_pair_target()},
            {"potential", {{"variant", "quadratic"}, {"dims", 2}, {"hessian", {{1.0, 0.0}, {0.0, 1.0}}}}},
            {"solver",
             {{"loss", "ot"},
              {"step_size", 0.01},
              {"max_epochs", 500},
              {"batch", 8192},
              {"eval_batch", 65536},
              {"final_n", 200000}}},
            {"seed", 1}};
  }
  if (subcommand == "push-samples") {
    return {{"experiment", "pushforward"},
            {"p0", default_pair_source()},
            {"p1", default_pair_target()},
            {"potential",
             {{"variant", "quadratic"},
              {"dims", 2},
              {"hessian", {{1.0, 0.0}, {0.0, std::sqrt(2.0)}}},
              {"shift", {1.0, -1.0}}}},
            {"push", {{"n", 10000}, {"steps", 10}, {"method", "rk4"}}},
            {"seed", 1}};
  }
  throw std::invalid_argument("unknown subcommand '" + std::string(subcommand) + "'");
}

void validate_config(const Json& config) { parse_experiment(config, fs::current_path()); }

int run(const std::vector<std::string>& args) {
  CLI::App app{"Optimal vector fields: OT, flow matching and action matching losses"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> n;
  std::string out;
  std::optional<double> conj_tol;
  std::optional<int> conj_max_iters;
  std::optional<int> threads;

  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--n", n, "Override the Monte Carlo sample count");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--conj-tol", conj_tol, "Conjugate solver tolerance");
    sub->add_option("--conj-max-iters", conj_max_iters, "Conjugate solver iteration budget");
    sub->add_option("--threads", threads, "Worker thread cap (default: OPTFIELD_THREADS)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitSuccess : kExitError;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  const auto started = std::chrono::steady_clock::now();
  try {
    Json config;
    fs::path base_dir = fs::current_path();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("--config", "cannot open " + config_path);
      try {
        config = Json::parse(in);
      } catch (const Json::parse_error& err) {
        throw ConfigError(config_path, err.what());
      }
      base_dir = fs::absolute(config_path).parent_path();
    } else {
      config = default_config(subcommand);
    }
    if (seed) config["seed"] = *seed;
    if (n) config["n"] = *n;
    if (!out.empty()) config["out"] = out;
    if (threads) config["threads"] = *threads;
    if (conj_tol || conj_max_iters) {
      if (!config.contains("conjugate")) config["conjugate"] = Json::object();
      if (conj_tol) config["conjugate"]["tol"] = *conj_tol;
      if (conj_max_iters) config["conjugate"]["max_iters"] = *conj_max_iters;
    }

    const Experiment experiment = parse_experiment(config, base_dir);
    if (experiment.threads > 0) set_thread_count(experiment.threads);
    const fs::path out_dir = experiment.out.empty() ? fs::path("out") / subcommand
                                                    : fs::path(experiment.out);
    fs::create_directories(out_dir);

    Json results = Json::object();
    Checks checks;
    if (subcommand == "verify-bracket") {
      verify_bracket(experiment, results, checks);
    } else if (subcommand == "verify-theorem") {
      verify_theorem(experiment, results, checks);
    } else if (subcommand == "verify-ofm-relation") {
      verify_ofm_relation(experiment, results, checks);
    } else if (subcommand == "solve-ot") {
      solve_ot(experiment, out_dir, results, checks);
    } else {
      push_samples(experiment, out_dir, results, checks);
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    Json report = {{"subcommand", subcommand},
                   {"experiment", experiment.name},
                   {"seed", experiment.seed},
                   {"n", experiment.n},
                   {"config", config},
                   {"results", results},
                   {"checks", checks.to_json()},
                   {"pass", checks.all_pass()},
                   {"wall_time_ms", wall_ms}};
    write_text(out_dir / "report.json", report.dump(2) + "\n");

    std::cout << subcommand << ": " << (checks.all_pass() ? "pass" : "FAIL") << " ("
              << (out_dir / "report.json").string() << ")\n";
    if (!checks.all_pass()) {
      std::cerr << "check failed: " << checks.first_failure() << "\n";
      return kExitCheckFailed;
    }
    return kExitSuccess;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitError;
  }
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace optfield
