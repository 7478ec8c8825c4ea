#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optfield/conjugate.hpp"
#include "optfield/couplings.hpp"
#include "optfield/distributions.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

enum class LossKind { kOt, kOfm, kAm };

std::string_view loss_kind_name(LossKind kind);

struct SolveConfig {
  LossKind loss_kind = LossKind::kOt;
  std::optional<PlanSpec> plan;  // required for kOfm
  std::optional<PathSpec> path;  // required for kAm
  double step_size = 0.05;
  int max_epochs = 500;
  Eigen::Index batch = 4096;
  /// Size of the fixed evaluation batch used for the trace and best-iterate
  /// selection.
  Eigen::Index eval_batch = 16384;
  double grad_tol = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double stabilizer = 1e-8;
  SolverSettings conjugate;
  /// Central-difference step for the fallback gradient and startup check.
  double fd_step = 1e-4;
  /// Relative mismatch between the analytic and finite-difference
  /// directional derivatives above which the solver switches to finite
  /// differences.
  double gradient_check_tol = 1e-3;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // on the fixed evaluation batch
  double std_error = 0.0;
  double grad_norm = 0.0;  // of this epoch's gradient estimate
  double wall_time_ms = 0.0;
};

struct SolveTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 = the initial potential
  double best_loss = 0.0;
  int conjugate_failures = 0;
  bool converged = false;  // smoothed gradient norm fell below grad_tol
  std::string gradient_mode;  // "analytic" or "finite_difference"
  double gradient_check_error = 0.0;
};

struct SolveResult {
  ConvexPotential potential;
  SolveTrace trace;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

/// Minimizes the chosen loss over the parameters of `init` with
/// bias-corrected first/second-moment averaged gradient steps on fresh
/// Monte Carlo batches (one seed stream per epoch). Losses are tracked on a
/// fixed evaluation batch (common random numbers) and the best iterate is
/// returned.
SolveResult minimize(const ConvexPotential& init, const Distribution& p0, const Distribution& p1,
                     const SolveConfig& config);

/// CSV with header: epoch,loss,std_error,grad_norm,wall_time_ms
void write_trace_csv(const SolveTrace& trace, std::ostream& out);

}  // namespace optfield
