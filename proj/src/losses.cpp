#include "optfield/losses.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <string>

#include "optfield/optimal_fields.hpp"
#include "optfield/parallel.hpp"
#include "optfield/rng.hpp"

namespace optfield {

namespace {

TermEstimate summarize(const Vector& samples) {
  const auto n = static_cast<double>(samples.size());
  TermEstimate t;
  t.value = samples.sum() / n;
  const double ss = (samples.array() - t.value).square().sum();
  t.std_error = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return t;
}

GradientEstimate summarize_rows(const Matrix& rows) {
  GradientEstimate g;
  const auto n = static_cast<double>(rows.rows());
  g.n_samples = rows.rows();
  g.value = rows.colwise().sum().transpose() / n;
  const Matrix centered = rows.rowwise() - g.value.transpose();
  const Vector ss = centered.colwise().squaredNorm().transpose();
  g.std_error = rows.rows() > 1 ? (ss / (n - 1.0) / n).cwiseSqrt().eval() : Vector::Zero(g.value.size()).eval();
  return g;
}

// Applies the conjugate acceptance gate around one solve.
class ConjugateGate {
 public:
  template <typename Solve>
  ConjugateResult operator()(Solve&& solve, Eigen::Index index) {
    try {
      return solve();
    } catch (const MaxItersExceeded& e) {
      if (e.best().argmax.size() > 0 && e.best().grad_norm <= kConjugateAcceptGate) {
        warnings_.fetch_add(1, std::memory_order_relaxed);
        return e.best();
      }
      throw EstimatorError("conjugate solve failed at sample " + std::to_string(index) + ": " +
                               e.what(),
                           index);
    }
  }

  int warnings() const { return warnings_.load(); }

  void report(const char* loss) const {
    if (warnings() > 0) {
      std::cerr << "warning: " << loss << ": accepted " << warnings()
                << " uncertified conjugate solves (residual <= " << kConjugateAcceptGate
                << ")\n";
    }
  }

 private:
  std::atomic<int> warnings_{0};
};

void require_samples(Eigen::Index n, const char* loss) {
  if (n < 2) throw std::invalid_argument(std::string(loss) + ": n must be >= 2");
}

Vector row(const Matrix& m, Eigen::Index i) { return m.row(i).transpose(); }

// Shared body of the FM-type losses; field(i, t, x_t) is the velocity at
// sample i.
template <typename Field>
LossEstimate straight_line_regression(Field&& field, const PlanSpec& plan, Eigen::Index n,
                                      std::uint64_t seed) {
  require_samples(n, "fm_loss");
  const SamplePairs pairs = plan.sample_pairs(n, seed);
  const Vector times = stratified_times(n, derive_seed(seed, StreamTag::kTime));
  Vector integrand(n);
  parallel_for(n, [&](std::ptrdiff_t i) {
    const double t = times(i);
    const Vector x0 = row(pairs.x0, i);
    const Vector x1 = row(pairs.x1, i);
    const Vector xt = (1.0 - t) * x0 + t * x1;
    integrand(i) = (field(i, t, xt) - (x1 - x0)).squaredNorm();
  });
  LossEstimate est;
  est.loss = "fm";
  est.n_samples = n;
  est.seed = seed;
  const TermEstimate s = summarize(integrand);
  est.value = s.value;
  est.std_error = s.std_error;
  return est;
}

}  // namespace

double combined_std_error(std::initializer_list<double> errors) {
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  return std::sqrt(sum);
}

Vector stratified_times(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, StreamTag::kTime, 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = (static_cast<double>(order[i]) + 0.5) / n;
  return t;
}

namespace {

/// Per-sample source and target terms of the OT dual.
struct DualSamples {
  Vector source_norms;  // ||x0||^2
  Vector target_norms;  // ||x1||^2
  Vector source;        // psi(x0)
  Vector target;        // psi*(x1)
  int warnings = 0;
};

DualSamples dual_samples(const ConvexPotential& psi, const Distribution& p0,
                         const Distribution& p1, Eigen::Index n, std::uint64_t seed,
                         const SolverSettings& settings, const char* caller) {
  require_samples(n, caller);
  const Matrix x0 = p0.sample(n, derive_seed(seed, StreamTag::kSource));
  const Matrix x1 = p1.sample(n, derive_seed(seed, StreamTag::kTarget));
  DualSamples out;
  out.source_norms = x0.rowwise().squaredNorm();
  out.target_norms = x1.rowwise().squaredNorm();
  out.source.resize(n);
  out.target.resize(n);
  ConjugateGate gate;
  parallel_for(n, [&](std::ptrdiff_t i) {
    out.source(i) = psi.eval(row(x0, i));
    const Vector y = row(x1, i);
    out.target(i) = gate([&] { return conjugate(psi, y, settings); }, i).value;
  });
  gate.report(caller);
  out.warnings = gate.warnings();
  return out;
}

}  // namespace

LossEstimate ot_loss(const ConvexPotential& psi, const Distribution& p0, const Distribution& p1,
                     Eigen::Index n, std::uint64_t seed, const SolverSettings& settings) {
  const DualSamples d = dual_samples(psi, p0, p1, n, seed, settings, "ot_loss");
  LossEstimate est;
  est.loss = "ot";
  est.n_samples = n;
  est.seed = seed;
  est.terms["source"] = summarize(d.source);
  est.terms["target"] = summarize(d.target);
  est.value = est.terms["source"].value + est.terms["target"].value;
  est.std_error =
      combined_std_error({est.terms["source"].std_error, est.terms["target"].std_error});
  est.conjugate_warnings = d.warnings;
  return est;
}

GradientEstimate ot_loss_grad(const ConvexPotential& psi, const Distribution& p0,
                              const Distribution& p1, Eigen::Index n, std::uint64_t seed,
                              const SolverSettings& settings) {
  require_samples(n, "ot_loss_grad");
  const Matrix x0 = p0.sample(n, derive_seed(seed, StreamTag::kSource));
  const Matrix x1 = p1.sample(n, derive_seed(seed, StreamTag::kTarget));
  Matrix source(n, psi.param_count());
  Matrix target(n, psi.param_count());
  ConjugateGate gate;
  parallel_for(n, [&](std::ptrdiff_t i) {
    source.row(i) = psi.param_grad(row(x0, i)).transpose();
    const Vector y = row(x1, i);
    const ConjugateResult c = gate([&] { return conjugate(psi, y, settings); }, i);
    target.row(i) = -psi.param_grad(c.argmax, c.piece_weights).transpose();
  });
  gate.report("ot_loss_grad");
  // The two expectations use independent draws, so their variances add.
  GradientEstimate a = summarize_rows(source);
  const GradientEstimate b = summarize_rows(target);
  a.value += b.value;
  a.std_error = (a.std_error.array().square() + b.std_error.array().square()).sqrt().matrix();
  return a;
}

LossEstimate fm_loss(const VelocityField& field, const PlanSpec& plan, Eigen::Index n,
                     std::uint64_t seed) {
  return straight_line_regression(
      [&](Eigen::Index, double t, const Vector& x) { return field(t, x); }, plan, n, seed);
}

LossEstimate ofm_loss(const ConvexPotential& psi, const PlanSpec& plan, Eigen::Index n,
                      std::uint64_t seed, const SolverSettings& settings) {
  ConjugateGate gate;
  LossEstimate est = straight_line_regression(
      [&](Eigen::Index i, double t, const Vector& x) {
        ConjugateResult start = gate([&] { return solve_start_point(psi, t, x, settings); }, i);
        return evaluate_field(psi, t, x, std::move(start)).velocity;
      },
      plan, n, seed);
  gate.report("ofm_loss");
  est.loss = "ofm";
  est.conjugate_warnings = gate.warnings();
  return est;
}

GradientEstimate ofm_loss_grad(const ConvexPotential& psi, const PlanSpec& plan,
                               Eigen::Index n, std::uint64_t seed,
                               const SolverSettings& settings) {
  require_samples(n, "ofm_loss_grad");
  const SamplePairs pairs = plan.sample_pairs(n, seed);
  const Vector times = stratified_times(n, derive_seed(seed, StreamTag::kTime));
  Matrix grads(n, psi.param_count());
  ConjugateGate gate;
  parallel_for(n, [&](std::ptrdiff_t i) {
    const double t = times(i);
    const Vector x0 = row(pairs.x0, i);
    const Vector x1 = row(pairs.x1, i);
    const Vector xt = (1.0 - t) * x0 + t * x1;
    ConjugateResult start = gate([&] { return solve_start_point(psi, t, xt, settings); }, i);
    const FieldEval f = evaluate_field(psi, t, xt, std::move(start));
    const Vector residual = f.velocity - (x1 - x0);
    Vector w;
    if (const auto* q = psi.as_quadratic()) {
      Matrix blended = t * q->hessian;
      blended.diagonal().array() += 1.0 - t;
      w = blended.llt().solve(residual);
    } else {
      w = residual / (t * psi.as_max_affine()->strength + (1.0 - t));
    }
    grads.row(i) = 2.0 * psi.param_grad_of_gradient(f.z0, w, f.piece_weights).transpose();
  });
  gate.report("ofm_loss_grad");
  return summarize_rows(grads);
}

LossEstimate am_loss(const ConvexPotential& psi, const PathSpec& path, Eigen::Index n,
                     std::uint64_t seed, const SolverSettings& settings) {
  require_samples(n, "am_loss");
  const SamplePairs pairs = path.plan().sample_pairs(n, seed);
  const Vector times = stratified_times(n, derive_seed(seed, StreamTag::kTime));
  Vector start(n);
  Vector end(n);
  Vector interior(n);
  ConjugateGate gate;
  parallel_for(n, [&](std::ptrdiff_t i) {
    const Vector x0 = row(pairs.x0, i);
    const Vector x1 = row(pairs.x1, i);
    start(i) = evaluate_field(psi, 0.0, x0, solve_start_point(psi, 0.0, x0, settings)).s_value;
    ConjugateResult at_end = gate([&] { return solve_start_point(psi, 1.0, x1, settings); }, i);
    end(i) = evaluate_field(psi, 1.0, x1, std::move(at_end)).s_value;

    const double t = times(i);
    const Vector xt = path.interpolate(x0, x1, t);
    ConjugateResult at_t = gate([&] { return solve_start_point(psi, t, xt, settings); }, i);
    const FieldEval f = evaluate_field(psi, t, xt, std::move(at_t));
    interior(i) = 0.5 * f.velocity.squaredNorm() + f.s_dt;
  });
  gate.report("am_loss");

  LossEstimate est;
  est.loss = "am";
  est.n_samples = n;
  est.seed = seed;
  est.terms["start"] = summarize(start);
  est.terms["end"] = summarize(end);
  est.terms["interior"] = summarize(interior);
  const TermEstimate total = summarize(start - end + interior);
  est.value = total.value;
  est.std_error = total.std_error;
  est.conjugate_warnings = gate.warnings();
  return est;
}

GradientEstimate am_loss_grad(const ConvexPotential& psi, const PathSpec& path, Eigen::Index n,
                              std::uint64_t seed, const SolverSettings& settings) {
  require_samples(n, "am_loss_grad");
  const SamplePairs pairs = path.plan().sample_pairs(n, seed);
  Matrix grads(n, psi.param_count());
  ConjugateGate gate;
  parallel_for(n, [&](std::ptrdiff_t i) {
    // d s_0 / d theta = d psi(x0) / d theta;  -d s_1 / d theta = d psi^*(x1) / d theta.
    const Vector y = row(pairs.x1, i);
    const ConjugateResult c = gate([&] { return conjugate(psi, y, settings); }, i);
    grads.row(i) =
        (psi.param_grad(row(pairs.x0, i)) - psi.param_grad(c.argmax, c.piece_weights)).transpose();
  });
  gate.report("am_loss_grad");
  return summarize_rows(grads);
}

LossEstimate w2_estimate(const ConvexPotential& psi, const Distribution& p0,
                         const Distribution& p1, Eigen::Index n, std::uint64_t seed,
                         const SolverSettings& settings) {
  // Pairing each draw's squared norm with its own dual term cancels most of
  // the noise near the optimum, where psi is close to a shifted quadratic.
  const DualSamples d = dual_samples(psi, p0, p1, n, seed, settings, "w2_estimate");
  LossEstimate est;
  est.loss = "w2_squared";
  est.n_samples = n;
  est.seed = seed;
  est.terms["source"] = summarize(d.source_norms - 2.0 * d.source);
  est.terms["target"] = summarize(d.target_norms - 2.0 * d.target);
  est.terms["ot"] = TermEstimate{d.source.mean() + d.target.mean(),
                                 combined_std_error({summarize(d.source).std_error,
                                                     summarize(d.target).std_error})};
  est.value = est.terms["source"].value + est.terms["target"].value;
  est.std_error =
      combined_std_error({est.terms["source"].std_error, est.terms["target"].std_error});
  est.conjugate_warnings = d.warnings;
  return est;
}

double am_constant(const Distribution& p0, const Distribution& p1) {
  return -0.5 * p0.second_moment() - 0.5 * p1.second_moment();
}

}  // namespace optfield
