#pragma once

#include <stdexcept>

#include "optfield/potentials.hpp"

namespace optfield {

struct SolverSettings {
  double tol = 1e-10;
  int max_iters = 500;
};

/// Legendre transform f*(y) = sup_z <y, z> - f(z) at one point.
struct ConjugateResult {
  double value = 0.0;
  Vector argmax;
  /// Candidate supports examined (max-affine) or 0 (closed form).
  int iterations = 0;
  /// Stationarity residual ||y - s|| for the certified subgradient s of f
  /// at argmax.
  double grad_norm = 0.0;
  /// Convex weights over max-affine pieces certifying y in df(argmax);
  /// empty for quadratics.
  Vector piece_weights;
};

/// Thrown when no certified maximizer is found; carries the best candidate
/// so callers can decide whether to accept it.
class MaxItersExceeded : public std::runtime_error {
 public:
  MaxItersExceeded(const std::string& what, ConjugateResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const ConjugateResult& best() const { return best_; }

 private:
  ConjugateResult best_;
};

/// phi_t(z) = t psi(z) + (1 - t) ||z||^2 / 2. Both potential families are
/// closed under this blend, so phi_t is materialized as a ConvexPotential:
///   quadratic:  L -> sqrt(t) L, b -> t b, c -> t c, ridge -> t ridge + 1 - t
///   max-affine: alpha -> t alpha + 1 - t, slopes and intercepts scaled by t
class TimeScaledPotential {
 public:
  TimeScaledPotential(const ConvexPotential& base, double t);

  double time() const { return t_; }
  const ConvexPotential& blended() const { return blended_; }
  double eval(const Vector& z) const { return blended_.eval(z); }
  Vector grad(const Vector& z) const { return blended_.grad(z); }
  /// (1 - t) + t * base modulus.
  double strong_convexity() const { return blended_.strong_convexity(); }

 private:
  double t_;
  ConvexPotential blended_;
};

/// Quadratics use one Cholesky solve. Max-affine conjugates are solved
/// exactly through the dual problem over the probability simplex
///   min_lambda ||y - S^T lambda||^2 / (2 alpha) - c^T lambda,
/// enumerating affinely independent supports of size <= D + 1 and
/// certifying the KKT conditions; z* = (y - S^T lambda) / alpha.
ConjugateResult conjugate(const ConvexPotential& f, const Vector& y,
                          const SolverSettings& settings = {});
ConjugateResult conjugate(const TimeScaledPotential& f, const Vector& y,
                          const SolverSettings& settings = {});

/// Conjugate of phi_t at x; argmax is z0 = grad phi_t^*(x). At t = 0 the
/// result is exact: z0 = x, with weights selecting psi's active piece at x.
ConjugateResult solve_start_point(const ConvexPotential& psi, double t, const Vector& x,
                                  const SolverSettings& settings = {});

/// Start z0 of the straight trajectory through x at time t, i.e. the
/// solution of t grad psi(z0) + (1 - t) z0 = x.
Vector recover_z0(const ConvexPotential& psi, double t, const Vector& x,
                  const SolverSettings& settings = {});

}  // namespace optfield
