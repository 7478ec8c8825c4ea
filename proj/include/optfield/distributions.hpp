#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace optfield {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Multivariate normal. The lower Cholesky factor of the covariance is
/// computed once at construction.
struct Gaussian {
  Vector mean;
  Matrix covariance;
  Matrix cholesky;
};

struct GaussianMixture {
  Vector weights;
  std::vector<Gaussian> components;
  /// Running sum of weights, last entry forced to exactly 1.
  Vector cumulative;
};

/// Axis-aligned box with lower < upper componentwise.
struct UniformBox {
  Vector lower;
  Vector upper;
};

/// Finite point cloud; sampling draws rows uniformly with replacement.
struct Empirical {
  Matrix points;  // N x D
};

/// Sampleable distribution on R^D with analytic moments. Immutable after
/// construction and safe to share across threads.
class Distribution {
 public:
  enum class Kind { kGaussian, kMixture, kUniform, kEmpirical };

  /// Throws std::invalid_argument unless cov is symmetric positive definite.
  static Distribution gaussian(Vector mean, Matrix covariance);
  static Distribution standard_normal(int dims);
  /// Component means/covariances; weights must lie on the simplex (1e-12).
  static Distribution mixture(Vector weights, const std::vector<Distribution>& components);
  static Distribution uniform(Vector lower, Vector upper);
  static Distribution empirical(Matrix points);
  /// One point per row, D numeric columns, no header, '.' decimal separator.
  static Distribution empirical_from_csv(const std::filesystem::path& path);

  Kind kind() const;
  std::string_view kind_name() const;
  int dims() const { return dims_; }

  /// n i.i.d. draws as the rows of an n x D matrix; a pure function of
  /// (*this, n, seed).
  Matrix sample(Eigen::Index n, std::uint64_t seed) const;

  /// E||x||^2, analytic except for Empirical (mean of squared row norms).
  double second_moment() const;
  Vector mean() const;
  Matrix covariance() const;

  const Gaussian* as_gaussian() const { return std::get_if<Gaussian>(&impl_); }
  const GaussianMixture* as_mixture() const { return std::get_if<GaussianMixture>(&impl_); }
  const UniformBox* as_uniform() const { return std::get_if<UniformBox>(&impl_); }
  const Empirical* as_empirical() const { return std::get_if<Empirical>(&impl_); }

 private:
  using Impl = std::variant<Gaussian, GaussianMixture, UniformBox, Empirical>;
  Distribution(Impl impl, int dims) : impl_(std::move(impl)), dims_(dims) {}

  Impl impl_;
  int dims_;
};

}  // namespace optfield
