#include "optfield/distributions.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "optfield/parallel.hpp"
#include "optfield/rng.hpp"

namespace optfield {

namespace {

Gaussian make_gaussian(Vector mean, Matrix covariance) {
  const auto d = mean.size();
  if (d < 1) throw std::invalid_argument("gaussian: mean must have at least one entry");
  if (covariance.rows() != d || covariance.cols() != d) {
    throw std::invalid_argument("gaussian: covariance must be " + std::to_string(d) + "x" +
                                std::to_string(d));
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw std::invalid_argument("gaussian: non-finite parameters");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("gaussian: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("gaussian: covariance is not positive definite");
  }
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("gaussian: Cholesky factorization failed");
  }
  Matrix cholesky = llt.matrixL();
  return Gaussian{std::move(mean), std::move(covariance), std::move(cholesky)};
}

void draw_gaussian(const Gaussian& g, Rng& rng, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  const auto d = g.mean.size();
  Vector z(d);
  for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
  out = (g.mean + g.cholesky.triangularView<Eigen::Lower>() * z).transpose();
}

double parse_double(std::string_view token, std::size_t line) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) {
    token.remove_suffix(1);
  }
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::invalid_argument("csv line " + std::to_string(line) + ": cannot parse '" +
                                std::string(token) + "' as a number");
  }
  return value;
}

}  // namespace

Distribution Distribution::gaussian(Vector mean, Matrix covariance) {
  const auto d = static_cast<int>(mean.size());
  return Distribution(make_gaussian(std::move(mean), std::move(covariance)), d);
}

Distribution Distribution::standard_normal(int dims) {
  return gaussian(Vector::Zero(dims), Matrix::Identity(dims, dims));
}

Distribution Distribution::mixture(Vector weights, const std::vector<Distribution>& components) {
  if (components.empty() || static_cast<std::size_t>(weights.size()) != components.size()) {
    throw std::invalid_argument("mixture: need one weight per component");
  }
  if (!weights.allFinite() || weights.minCoeff() < 0.0) {
    throw std::invalid_argument("mixture: weights must be nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture: weights must sum to 1");
  }
  GaussianMixture mix;
  const int d = components.front().dims();
  for (const auto& c : components) {
    const Gaussian* g = c.as_gaussian();
    if (g == nullptr) throw std::invalid_argument("mixture: components must be Gaussian");
    if (c.dims() != d) throw std::invalid_argument("mixture: component dimensions differ");
    mix.components.push_back(*g);
  }
  mix.cumulative.resize(weights.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights(k);
    mix.cumulative(k) = acc;
  }
  mix.cumulative(weights.size() - 1) = 1.0;
  mix.weights = std::move(weights);
  return Distribution(std::move(mix), d);
}

Distribution Distribution::uniform(Vector lower, Vector upper) {
  if (lower.size() < 1 || lower.size() != upper.size()) {
    throw std::invalid_argument("uniform: bounds must have equal, positive length");
  }
  if (!lower.allFinite() || !upper.allFinite() || !(lower.array() < upper.array()).all()) {
    throw std::invalid_argument("uniform: require finite lower < upper componentwise");
  }
  const auto d = static_cast<int>(lower.size());
  return Distribution(UniformBox{std::move(lower), std::move(upper)}, d);
}

Distribution Distribution::empirical(Matrix points) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw std::invalid_argument("empirical: need at least one point");
  }
  if (!points.allFinite()) throw std::invalid_argument("empirical: non-finite point");
  const auto d = static_cast<int>(points.cols());
  return Distribution(Empirical{std::move(points)}, d);
}

Distribution Distribution::empirical_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path.string() + ": no data rows");
  Matrix points(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) points(i, j) = rows[i][j];
  }
  return empirical(std::move(points));
}

Distribution::Kind Distribution::kind() const { return static_cast<Kind>(impl_.index()); }

std::string_view Distribution::kind_name() const {
  switch (kind()) {
    case Kind::kGaussian: return "gaussian";
    case Kind::kMixture: return "mixture";
    case Kind::kUniform: return "uniform";
    case Kind::kEmpirical: return "empirical";
  }
  return "unknown";
}

Matrix Distribution::sample(Eigen::Index n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("sample: n must be positive");
  Matrix out(n, dims_);
  parallel_for(n, [&](std::ptrdiff_t i) {
    Rng rng = Rng::stream(seed, StreamTag::kSample, static_cast<std::uint64_t>(i));
    auto row = out.row(i);
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            draw_gaussian(d, rng, row);
          } else if constexpr (std::is_same_v<T, GaussianMixture>) {
            const double u = rng.uniform();
            Eigen::Index k = 0;
            while (k + 1 < d.cumulative.size() && u >= d.cumulative(k)) ++k;
            draw_gaussian(d.components[k], rng, row);
          } else if constexpr (std::is_same_v<T, UniformBox>) {
            for (Eigen::Index j = 0; j < d.lower.size(); ++j) {
              row(j) = d.lower(j) + (d.upper(j) - d.lower(j)) * rng.uniform();
            }
          } else {
            row = d.points.row(static_cast<Eigen::Index>(rng.below(d.points.rows())));
          }
        },
        impl_);
  });
  return out;
}

double Distribution::second_moment() const {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return d.mean.squaredNorm() + d.covariance.trace();
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          double m = 0.0;
          for (std::size_t k = 0; k < d.components.size(); ++k) {
            const auto& c = d.components[k];
            m += d.weights(k) * (c.mean.squaredNorm() + c.covariance.trace());
          }
          return m;
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          // E[x^2] on [a, b] is (a^2 + ab + b^2) / 3.
          const auto a = d.lower.array();
          const auto b = d.upper.array();
          return ((a * a + a * b + b * b) / 3.0).sum();
        } else {
          return d.points.rowwise().squaredNorm().mean();
        }
      },
      impl_);
}

Vector Distribution::mean() const {
  return std::visit(
      [](const auto& d) -> Vector {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return d.mean;
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          Vector m = Vector::Zero(d.components.front().mean.size());
          for (std::size_t k = 0; k < d.components.size(); ++k) {
            m += d.weights(k) * d.components[k].mean;
          }
          return m;
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return 0.5 * (d.lower + d.upper);
        } else {
          return d.points.colwise().mean().transpose();
        }
      },
      impl_);
}

Matrix Distribution::covariance() const {
  return std::visit(
      [this](const auto& d) -> Matrix {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return d.covariance;
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          const Vector m = mean();
          Matrix c = Matrix::Zero(m.size(), m.size());
          for (std::size_t k = 0; k < d.components.size(); ++k) {
            const Vector delta = d.components[k].mean - m;
            c += d.weights(k) * (d.components[k].covariance + delta * delta.transpose());
          }
          return c;
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          const Vector width = d.upper - d.lower;
          return (width.array().square() / 12.0).matrix().asDiagonal();
        } else {
          const Matrix centered = d.points.rowwise() - d.points.colwise().mean();
          return centered.transpose() * centered / static_cast<double>(d.points.rows());
        }
      },
      impl_);
}

}  // namespace optfield
