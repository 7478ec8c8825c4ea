#pragma once

#include <optional>

#include "optfield/conjugate.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

/// Everything the optimal field knows at one (t, x).
struct FieldEval {
  Vector velocity;  // u_t(x) = g - z0 with g in d psi(z0) certified by the solve
  double s_value = 0.0;
  double s_dt = 0.0;  // -0.5 ||u||^2
  Vector z0;
  Vector piece_weights;  // active max-affine pieces at z0 (empty for quadratics)
};

/// The trajectory through x at time t is the straight line
/// z0 -> grad psi(z0); u is its (constant) velocity and s its scalar
/// potential, s_t(x) = ||x||^2 / (2t) - phi_t^*(x) / t. s is evaluated in the
/// algebraically identical form psi(z0) - ||z0||^2 / 2 + (t / 2) ||u||^2,
/// which has no division by t and reduces to the t = 0 and t = 1 corner
/// formulas (t = 1 is evaluated as ||x||^2 / 2 - psi^*(x) directly).
FieldEval evaluate_field(const ConvexPotential& psi, double t, const Vector& x,
                         const SolverSettings& settings = {});

/// Same as evaluate_field, reusing an already solved start point
/// (solve_start_point(psi, t, x)).
FieldEval evaluate_field(const ConvexPotential& psi, double t, const Vector& x,
                         ConjugateResult start);

Vector field_velocity(const ConvexPotential& psi, double t, const Vector& x,
                      const SolverSettings& settings = {});
double s_eval(const ConvexPotential& psi, double t, const Vector& x,
              const SolverSettings& settings = {});
/// Envelope-theorem time derivative: -0.5 ||u_t(x)||^2.
double s_time_derivative(const ConvexPotential& psi, double t, const Vector& x,
                         const SolverSettings& settings = {});
/// 0.5 ||grad s_t(x)||^2 + ds_t/dt(x); vanishes for every optimal field.
double bracket(const ConvexPotential& psi, double t, const Vector& x,
               const SolverSettings& settings = {});

/// Bracket recomputed purely from central differences of s_eval: steps hx
/// in each coordinate of x and ht in time. Returns nullopt when the
/// perturbed points see a different set of active max-affine pieces than
/// (t, x), where s is only C^1 and differencing is not meaningful.
std::optional<double> audited_bracket(const ConvexPotential& psi, double t, const Vector& x,
                                      double hx = 1e-5, double ht = 1e-4,
                                      const SolverSettings& settings = {});

enum class OdeMethod { kEuler, kRk4 };

/// Integrates dx/dt = u_t(x) from t = 0 to 1 for each row of x0 with fixed
/// steps. The exact endpoint is grad psi(x0).
Matrix pushforward(const ConvexPotential& psi, const Matrix& x0, int steps, OdeMethod method,
                   const SolverSettings& settings = {});

}  // namespace optfield
