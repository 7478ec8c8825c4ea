#include "optfield/solver.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>

#include "optfield/losses.hpp"
#include "optfield/rng.hpp"

namespace optfield {

namespace {

constexpr int kMaxConsecutiveFailures = 10;

struct Objective {
  std::function<LossEstimate(const ConvexPotential&, Eigen::Index, std::uint64_t)> loss;
  std::function<Vector(const ConvexPotential&, Eigen::Index, std::uint64_t)> gradient;
};

Objective make_objective(const Distribution& p0, const Distribution& p1,
                         const SolveConfig& config) {
  const SolverSettings settings = config.conjugate;
  switch (config.loss_kind) {
    case LossKind::kOt:
      return {[&p0, &p1, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return ot_loss(psi, p0, p1, n, s, settings);
              },
              [&p0, &p1, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return ot_loss_grad(psi, p0, p1, n, s, settings).value;
              }};
    case LossKind::kOfm: {
      if (!config.plan) throw std::invalid_argument("minimize: ofm loss needs a plan");
      const PlanSpec& plan = *config.plan;
      return {[&plan, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return ofm_loss(psi, plan, n, s, settings);
              },
              [&plan, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return ofm_loss_grad(psi, plan, n, s, settings).value;
              }};
    }
    case LossKind::kAm: {
      if (!config.path) throw std::invalid_argument("minimize: am loss needs a path");
      const PathSpec& path = *config.path;
      return {[&path, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return am_loss(psi, path, n, s, settings);
              },
              [&path, settings](const ConvexPotential& psi, Eigen::Index n, std::uint64_t s) {
                return am_loss_grad(psi, path, n, s, settings).value;
              }};
    }
  }
  throw std::invalid_argument("minimize: unknown loss kind");
}

double central_difference(const Objective& objective, const ConvexPotential& psi,
                          const Vector& direction, double h, Eigen::Index n,
                          std::uint64_t seed) {
  const Vector theta = psi.params();
  const double plus = objective.loss(psi.with_params(theta + h * direction), n, seed).value;
  const double minus = objective.loss(psi.with_params(theta - h * direction), n, seed).value;
  return (plus - minus) / (2.0 * h);
}

Vector finite_difference_gradient(const Objective& objective, const ConvexPotential& psi,
                                  double h, Eigen::Index n, std::uint64_t seed) {
  Vector g(psi.param_count());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    g(j) = central_difference(objective, psi, Vector::Unit(g.size(), j), h, n, seed);
  }
  return g;
}

void validate(const SolveConfig& c, const ConvexPotential& init, const Distribution& p0,
              const Distribution& p1) {
  if (!(c.step_size > 0.0)) throw std::invalid_argument("minimize: step_size must be > 0");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0 && c.beta2 > 0.0 && c.beta2 < 1.0)) {
    throw std::invalid_argument("minimize: moment decays must lie in (0, 1)");
  }
  if (!(c.stabilizer > 0.0)) throw std::invalid_argument("minimize: stabilizer must be > 0");
  if (c.max_epochs < 1) throw std::invalid_argument("minimize: max_epochs must be >= 1");
  if (c.batch < 2 || c.eval_batch < 2) {
    throw std::invalid_argument("minimize: batch sizes must be >= 2");
  }
  if (init.dims() != p0.dims() || init.dims() != p1.dims()) {
    throw std::invalid_argument("minimize: potential and distributions differ in dimension");
  }
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kOt: return "ot";
    case LossKind::kOfm: return "ofm";
    case LossKind::kAm: return "am";
  }
  return "unknown";
}

SolveResult minimize(const ConvexPotential& init, const Distribution& p0, const Distribution& p1,
                     const SolveConfig& config) {
  validate(config, init, p0, p1);
  const Objective objective = make_objective(p0, p1, config);
  const std::uint64_t eval_seed = derive_seed(config.seed, StreamTag::kEvaluation);
  const std::uint64_t epoch_root = derive_seed(config.seed, StreamTag::kEpoch);
  const auto started = std::chrono::steady_clock::now();

  SolveTrace trace;
  ConvexPotential current = init;
  ConvexPotential best = init;

  // Startup check: analytic gradient against a common-random-number central
  // difference along a random direction.
  {
    Rng rng = Rng::stream(config.seed, StreamTag::kDirection, 0);
    Vector direction(init.param_count());
    for (Eigen::Index j = 0; j < direction.size(); ++j) direction(j) = rng.normal();
    direction.normalize();
    const std::uint64_t check_seed = derive_seed(eval_seed, StreamTag::kDirection);
    const double analytic =
        objective.gradient(init, config.batch, check_seed).dot(direction);
    const double numeric =
        central_difference(objective, init, direction, config.fd_step, config.batch, check_seed);
    trace.gradient_check_error =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    trace.gradient_mode =
        trace.gradient_check_error <= config.gradient_check_tol ? "analytic" : "finite_difference";
    if (trace.gradient_mode != "analytic") {
      std::cerr << "warning: minimize: analytic " << loss_kind_name(config.loss_kind)
                << " gradient disagrees with finite differences (relative error "
                << trace.gradient_check_error << "); using finite differences\n";
    }
  }
  const bool analytic = trace.gradient_mode == "analytic";

  trace.best_loss = objective.loss(init, config.eval_batch, eval_seed).value;
  if (!std::isfinite(trace.best_loss)) throw SolveError("minimize: initial loss is not finite", trace);

  Vector theta = init.params();
  Vector first = Vector::Zero(theta.size());
  Vector second = Vector::Zero(theta.size());
  double decay1 = 1.0;
  double decay2 = 1.0;
  int consecutive_failures = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t seed = derive_seed(epoch_root, static_cast<std::uint64_t>(epoch));
    Vector grad;
    try {
      grad = analytic ? objective.gradient(current, config.batch, seed)
                      : finite_difference_gradient(objective, current, config.fd_step,
                                                   config.batch, seed);
      consecutive_failures = 0;
    } catch (const EstimatorError& e) {
      ++trace.conjugate_failures;
      if (++consecutive_failures >= kMaxConsecutiveFailures) {
        throw SolveError(std::string("minimize: repeated conjugate failures: ") + e.what(), trace);
      }
      continue;
    }
    if (!grad.allFinite()) throw SolveError("minimize: non-finite gradient", trace);

    first = config.beta1 * first + (1.0 - config.beta1) * grad;
    second = config.beta2 * second + (1.0 - config.beta2) * grad.cwiseAbs2();
    decay1 *= config.beta1;
    decay2 *= config.beta2;
    const Vector first_hat = first / (1.0 - decay1);
    const Vector second_hat = second / (1.0 - decay2);
    theta -= config.step_size *
             (first_hat.array() / (second_hat.array().sqrt() + config.stabilizer)).matrix();
    current = current.with_params(theta);

    LossEstimate loss;
    try {
      loss = objective.loss(current, config.eval_batch, eval_seed);
    } catch (const EstimatorError&) {
      ++trace.conjugate_failures;
      continue;
    }
    if (!std::isfinite(loss.value)) throw SolveError("minimize: non-finite loss", trace);

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss.value;
    record.std_error = loss.std_error;
    record.grad_norm = grad.norm();
    record.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    trace.epochs.push_back(record);

    if (loss.value < trace.best_loss) {
      trace.best_loss = loss.value;
      trace.best_epoch = epoch;
      best = current;
    }
    if (first_hat.norm() <= config.grad_tol) {
      trace.converged = true;
      break;
    }
  }
  return SolveResult{std::move(best), std::move(trace)};
}

void write_trace_csv(const SolveTrace& trace, std::ostream& out) {
  out << "epoch,loss,std_error,grad_norm,wall_time_ms\n";
  out << std::setprecision(17);
  for (const auto& r : trace.epochs) {
    out << r.epoch << ',' << r.loss << ',' << r.std_error << ',' << r.grad_norm << ','
        << std::setprecision(6) << r.wall_time_ms << std::setprecision(17) << '\n';
  }
}

}  // namespace optfield
