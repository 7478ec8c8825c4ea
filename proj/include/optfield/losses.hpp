#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <stdexcept>
#include <string>

#include "optfield/conjugate.hpp"
#include "optfield/couplings.hpp"
#include "optfield/distributions.hpp"
#include "optfield/potentials.hpp"

namespace optfield {

/// Conjugate solves that end uncertified are still accepted when their
/// residual is at most this; anything worse aborts the estimate.
inline constexpr double kConjugateAcceptGate = 1e-6;

struct TermEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate; std_error is the sample standard deviation of the
/// per-sample integrand over sqrt(n).
struct LossEstimate {
  std::string loss;
  double value = 0.0;
  double std_error = 0.0;
  Eigen::Index n_samples = 0;
  std::uint64_t seed = 0;
  std::map<std::string, TermEstimate> terms;
  int conjugate_warnings = 0;
};

/// Per-coordinate mean and standard error of a parameter gradient.
struct GradientEstimate {
  Vector value;
  Vector std_error;
  Eigen::Index n_samples = 0;
};

/// A conjugate solve failed the acceptance gate at one sample.
class EstimatorError : public std::runtime_error {
 public:
  EstimatorError(const std::string& what, Eigen::Index sample_index)
      : std::runtime_error(what), sample_index_(sample_index) {}
  Eigen::Index sample_index() const { return sample_index_; }

 private:
  Eigen::Index sample_index_;
};

using VelocityField = std::function<Vector(double t, const Vector& x)>;

/// sqrt of the summed squares; the error bar of a sum or difference of
/// estimates treated as independent.
double combined_std_error(std::initializer_list<double> errors);

/// Midpoint strata t_i = (pi(i) + 0.5) / n under a seeded permutation pi.
Vector stratified_times(Eigen::Index n, std::uint64_t seed);

/// E_p0[psi] + E_p1[psi^*]; terms "source" and "target".
LossEstimate ot_loss(const ConvexPotential& psi, const Distribution& p0, const Distribution& p1,
                     Eigen::Index n, std::uint64_t seed, const SolverSettings& settings = {});

/// Danskin: d psi^*(y) / d theta = -d psi(z*(y)) / d theta.
GradientEstimate ot_loss_grad(const ConvexPotential& psi, const Distribution& p0,
                              const Distribution& p1, Eigen::Index n, std::uint64_t seed,
                              const SolverSettings& settings = {});

/// E_{t, (x0, x1) ~ plan} ||u_t(x_t) - (x1 - x0)||^2 with x_t on the straight
/// line and stratified t.
LossEstimate fm_loss(const VelocityField& field, const PlanSpec& plan, Eigen::Index n,
                     std::uint64_t seed);

/// fm_loss of the optimal field of psi.
LossEstimate ofm_loss(const ConvexPotential& psi, const PlanSpec& plan, Eigen::Index n,
                      std::uint64_t seed, const SolverSettings& settings = {});

/// Gradient of ofm_loss in theta by implicit differentiation of the start
/// point: du/dtheta = (t H + (1 - t) I)^{-1} d(grad psi)(z0)/dtheta. Exact for
/// quadratics; for max-affine it uses the certified active pieces and the
/// smooth-part Hessian, which is inexact on kink faces.
GradientEstimate ofm_loss_grad(const ConvexPotential& psi, const PlanSpec& plan,
                               Eigen::Index n, std::uint64_t seed,
                               const SolverSettings& settings = {});

/// E_p0[s_0] - E_p1[s_1] + int E_pt[0.5 ||grad s_t||^2 + ds_t/dt] dt for
/// s = s^psi, with the marginals and x_t drawn from the path. Terms "start",
/// "end" and "interior".
LossEstimate am_loss(const ConvexPotential& psi, const PathSpec& path, Eigen::Index n,
                     std::uint64_t seed, const SolverSettings& settings = {});

/// Endpoint terms by Danskin; the interior integrand vanishes identically in
/// theta, so it contributes nothing.
GradientEstimate am_loss_grad(const ConvexPotential& psi, const PathSpec& path, Eigen::Index n,
                              std::uint64_t seed, const SolverSettings& settings = {});

/// Mean of ||x0||^2 - 2 psi(x0) + ||x1||^2 - 2 psi*(x1) over the draws of
/// ot_loss; equals W2^2 at the Brenier potential.
LossEstimate w2_estimate(const ConvexPotential& psi, const Distribution& p0,
                         const Distribution& p1, Eigen::Index n, std::uint64_t seed,
                         const SolverSettings& settings = {});

/// -0.5 E||x0||^2 - 0.5 E||x1||^2, the gap between L_AM(s^psi) and L_OT(psi).
double am_constant(const Distribution& p0, const Distribution& p1);

}  // namespace optfield
