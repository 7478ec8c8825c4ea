#include "optfield/optimal_fields.hpp"

#include <stdexcept>
#include <vector>

#include "optfield/parallel.hpp"

namespace optfield {

FieldEval evaluate_field(const ConvexPotential& psi, double t, const Vector& x,
                         const SolverSettings& settings) {
  if (x.size() != psi.dims()) throw std::invalid_argument("field: dimension mismatch");
  return evaluate_field(psi, t, x, solve_start_point(psi, t, x, settings));
}

FieldEval evaluate_field(const ConvexPotential& psi, double t, const Vector& x,
                         ConjugateResult start) {
  FieldEval out;
  out.z0 = std::move(start.argmax);
  out.piece_weights = std::move(start.piece_weights);
  out.velocity = psi.subgradient(out.z0, out.piece_weights) - out.z0;
  const double speed_sq = out.velocity.squaredNorm();
  out.s_dt = -0.5 * speed_sq;
  if (t == 1.0) {
    // phi_1 = psi, so start.value is psi^*(x).
    out.s_value = 0.5 * x.squaredNorm() - start.value;
  } else {
    out.s_value = psi.eval(out.z0) - 0.5 * out.z0.squaredNorm() + 0.5 * t * speed_sq;
  }
  return out;
}

Vector field_velocity(const ConvexPotential& psi, double t, const Vector& x,
                      const SolverSettings& settings) {
  return evaluate_field(psi, t, x, settings).velocity;
}

double s_eval(const ConvexPotential& psi, double t, const Vector& x,
              const SolverSettings& settings) {
  return evaluate_field(psi, t, x, settings).s_value;
}

double s_time_derivative(const ConvexPotential& psi, double t, const Vector& x,
                         const SolverSettings& settings) {
  return evaluate_field(psi, t, x, settings).s_dt;
}

double bracket(const ConvexPotential& psi, double t, const Vector& x,
               const SolverSettings& settings) {
  const FieldEval f = evaluate_field(psi, t, x, settings);
  return 0.5 * f.velocity.squaredNorm() + f.s_dt;
}

namespace {

std::vector<Eigen::Index> support(const Vector& weights) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (weights(k) > 0.0) s.push_back(k);
  }
  return s;
}

}  // namespace

std::optional<double> audited_bracket(const ConvexPotential& psi, double t, const Vector& x,
                                      double hx, double ht, const SolverSettings& settings) {
  if (!(t - ht >= 0.0 && t + ht <= 1.0)) {
    throw std::invalid_argument("audited_bracket: t +- ht must stay inside [0, 1]");
  }
  const bool kinked = psi.as_max_affine() != nullptr;
  const auto center = kinked ? support(evaluate_field(psi, t, x, settings).piece_weights)
                             : std::vector<Eigen::Index>{};
  bool crossed = false;
  auto s_at = [&](double time, const Vector& point) {
    const FieldEval f = evaluate_field(psi, time, point, settings);
    if (kinked && support(f.piece_weights) != center) crossed = true;
    return f.s_value;
  };

  Vector grad_fd(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector plus = x;
    Vector minus = x;
    plus(j) += hx;
    minus(j) -= hx;
    grad_fd(j) = (s_at(t, plus) - s_at(t, minus)) / (2.0 * hx);
  }
  const double dt_fd = (s_at(t + ht, x) - s_at(t - ht, x)) / (2.0 * ht);
  if (crossed) return std::nullopt;
  return 0.5 * grad_fd.squaredNorm() + dt_fd;
}

Matrix pushforward(const ConvexPotential& psi, const Matrix& x0, int steps, OdeMethod method,
                   const SolverSettings& settings) {
  if (steps < 1) throw std::invalid_argument("pushforward: steps must be >= 1");
  if (x0.cols() != psi.dims()) throw std::invalid_argument("pushforward: dimension mismatch");
  Matrix out(x0.rows(), x0.cols());
  const double h = 1.0 / steps;
  parallel_for(x0.rows(), [&](std::ptrdiff_t i) {
    Vector x = x0.row(i).transpose();
    auto u = [&](double t, const Vector& p) {
      return field_velocity(psi, std::min(t, 1.0), p, settings);
    };
    for (int k = 0; k < steps; ++k) {
      const double t = k * h;
      if (method == OdeMethod::kEuler) {
        x += h * u(t, x);
      } else {
        const Vector k1 = u(t, x);
        const Vector k2 = u(t + 0.5 * h, x + 0.5 * h * k1);
        const Vector k3 = u(t + 0.5 * h, x + 0.5 * h * k2);
        const Vector k4 = u(t + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    out.row(i) = x.transpose();
  });
  return out;
}

}  // namespace optfield
