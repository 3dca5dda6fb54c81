#include "mortgp/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mortgp {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kSogp: return "sogp";
    case KernelFamily::kFullRank: return "full_rank";
    case KernelFamily::kIcm: return "icm";
  }
  throw std::logic_error("unreachable");
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "sogp") return KernelFamily::kSogp;
  if (name == "full_rank") return KernelFamily::kFullRank;
  if (name == "icm") return KernelFamily::kIcm;
  throw std::invalid_argument("unknown kernel family '" + name +
                              "' (expected sogp, full_rank, or icm)");
}

double se_covariance(double age_i, double year_i, double age_j, double year_j,
                     const SEParams& params) {
  const double da = (age_i - age_j) / params.length_age;
  const double dy = (year_i - year_j) / params.length_year;
  return params.process_variance * std::exp(-0.5 * (da * da + dy * dy));
}

Eigen::MatrixXd se_gram(const std::vector<double>& coords,
                        double length_scale) {
  const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (coords[static_cast<std::size_t>(i)] -
                        coords[static_cast<std::size_t>(j)]) /
                       length_scale;
      const double v = std::exp(-0.5 * d * d);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

std::size_t CrossThetas::pair_count(int population_count) {
  return static_cast<std::size_t>(population_count) *
         static_cast<std::size_t>(population_count - 1) / 2;
}

CrossThetas::CrossThetas(int population_count, std::vector<double> values)
    : count_(population_count), values_(std::move(values)) {
  if (population_count < 1) {
    throw std::invalid_argument("cross thetas: population count must be >= 1");
  }
  if (values_.size() != pair_count(population_count)) {
    throw std::invalid_argument(
        "cross thetas: expected " +
        std::to_string(pair_count(population_count)) + " values, got " +
        std::to_string(values_.size()));
  }
}

double CrossThetas::at(int l1, int l2) const {
  if (l1 < 0 || l2 < 0 || l1 >= count_ || l2 >= count_) {
    throw std::invalid_argument("cross thetas: population index out of range");
  }
  if (l1 == l2) return 0.0;
  const int a = std::min(l1, l2);
  const int b = std::max(l1, l2);
  // Row-major offset into the strict upper triangle.
  const std::size_t index =
      static_cast<std::size_t>(a) * static_cast<std::size_t>(count_) -
      static_cast<std::size_t>(a) * static_cast<std::size_t>(a + 1) / 2 +
      static_cast<std::size_t>(b - a - 1);
  return values_[index];
}

double CrossThetas::correlation(int l1, int l2) const {
  return l1 == l2 ? 1.0 : std::exp(-at(l1, l2));
}

Eigen::MatrixXd CrossThetas::correlation_matrix() const {
  Eigen::MatrixXd gamma(count_, count_);
  for (int i = 0; i < count_; ++i) {
    for (int j = 0; j < count_; ++j) {
      gamma(i, j) = correlation(i, j);
    }
  }
  return gamma;
}

Eigen::MatrixXd KernelSpec::cross_covariance() const {
  const int L = population_count();
  switch (family) {
    case KernelFamily::kSogp: {
      Eigen::MatrixXd b(1, 1);
      b(0, 0) = se.process_variance;
      return b;
    }
    case KernelFamily::kFullRank:
      return se.process_variance * cross.correlation_matrix();
    case KernelFamily::kIcm:
      return loadings * loadings.transpose();
  }
  (void)L;
  throw std::logic_error("unreachable");
}

int KernelSpec::parameter_count() const {
  const int L = population_count();
  switch (family) {
    case KernelFamily::kSogp:
      return 2 + 1 + 1;  // length scales, process variance, noise
    case KernelFamily::kFullRank:
      return 2 + 1 + static_cast<int>(CrossThetas::pair_count(L)) + L;
    case KernelFamily::kIcm:
      return 2 + L * rank() + L;
  }
  throw std::logic_error("unreachable");
}

void KernelSpec::validate(int expected_populations) const {
  const int L = population_count();
  if (L != expected_populations) {
    throw std::invalid_argument(
        "kernel: noise variance count " + std::to_string(L) +
        " does not match population count " +
        std::to_string(expected_populations));
  }
  if (!(se.length_age > 0.0) || !std::isfinite(se.length_age) ||
      !(se.length_year > 0.0) || !std::isfinite(se.length_year)) {
    throw std::invalid_argument("kernel: length scales must be positive");
  }
  if (!(se.process_variance > 0.0) || !std::isfinite(se.process_variance)) {
    throw std::invalid_argument("kernel: process variance must be positive");
  }
  for (Eigen::Index l = 0; l < noise_variances.size(); ++l) {
    if (noise_variances[l] < 0.0 || !std::isfinite(noise_variances[l])) {
      throw std::invalid_argument(
          "kernel: noise variances must be nonnegative");
    }
  }

  switch (family) {
    case KernelFamily::kSogp:
      if (L != 1) {
        throw std::invalid_argument(
            "kernel: sogp family requires exactly one population");
      }
      if (!cross.values().empty() || loadings.size() != 0) {
        throw std::invalid_argument("kernel: sogp family takes no "
                                    "cross-population parameters");
      }
      break;
    case KernelFamily::kFullRank: {
      if (cross.population_count() != L) {
        throw std::invalid_argument(
            "kernel: cross theta table sized for " +
            std::to_string(cross.population_count()) + " populations");
      }
      if (loadings.size() != 0) {
        throw std::invalid_argument(
            "kernel: full_rank family takes no loadings");
      }
      for (const double theta : cross.values()) {
        if (theta < 0.0 || !std::isfinite(theta)) {
          throw std::invalid_argument(
              "kernel: cross thetas must be nonnegative");
        }
      }
      if (L >= 3) {
        const Eigen::MatrixXd gamma = cross.correlation_matrix();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gamma);
        if (eig.info() != Eigen::Success) {
          throw std::runtime_error(
              "kernel: correlation eigendecomposition failed");
        }
        if (eig.eigenvalues().minCoeff() < -1e-8) {
          throw std::invalid_argument(
              "kernel: cross-population correlation matrix is not positive "
              "semidefinite");
        }
      }
      break;
    }
    case KernelFamily::kIcm: {
      if (loadings.rows() != L || loadings.cols() < 1) {
        throw std::invalid_argument("kernel: loadings must be L x Q with "
                                    "Q >= 1");
      }
      if (!loadings.allFinite()) {
        throw std::invalid_argument("kernel: loadings must be finite");
      }
      if (se.process_variance != 1.0) {
        throw std::invalid_argument(
            "kernel: icm family pins the shared process variance to 1; "
            "scale belongs to the loadings");
      }
      if (!cross.values().empty()) {
        throw std::invalid_argument("kernel: icm family takes no cross "
                                    "thetas");
      }
      break;
    }
  }
}

KernelEvaluator::KernelEvaluator(const KernelSpec& spec, int population_count)
    : unit_se_(spec.se), b_(spec.cross_covariance()) {
  spec.validate(population_count);
  unit_se_.process_variance = 1.0;
}

double KernelEvaluator::operator()(int pop_i, double age_i, double year_i,
                                   int pop_j, double age_j,
                                   double year_j) const {
  if (pop_i < 0 || pop_j < 0 || pop_i >= b_.rows() || pop_j >= b_.rows()) {
    throw std::invalid_argument("kernel: population index out of range");
  }
  return b_(pop_i, pop_j) *
         se_covariance(age_i, year_i, age_j, year_j, unit_se_);
}

CovarianceMatrices build_covariance(const MortalityPanel& panel,
                                    const KernelSpec& spec) {
  const KernelEvaluator kernel(spec, panel.population_count());
  const auto& obs = panel.observations();
  const Eigen::Index m = static_cast<Eigen::Index>(obs.size());

  CovarianceMatrices result;
  result.latent.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Observation& a = obs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i; j < m; ++j) {
      const Observation& b = obs[static_cast<std::size_t>(j)];
      const double v =
          kernel(a.population, a.age, a.year, b.population, b.age, b.year);
      result.latent(i, j) = v;
      result.latent(j, i) = v;
    }
  }
  result.noisy = result.latent;
  for (Eigen::Index i = 0; i < m; ++i) {
    result.noisy(i, i) +=
        spec.noise_variances[obs[static_cast<std::size_t>(i)].population];
  }
  return result;
}

Eigen::MatrixXd cross_covariance_matrix(const MortalityPanel& panel,
                                        const std::vector<Cell>& cells,
                                        const KernelSpec& spec) {
  const KernelEvaluator kernel(spec, panel.population_count());
  const auto& obs = panel.observations();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(obs.size()),
                    static_cast<Eigen::Index>(cells.size()));
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const Cell& c = cells[j];
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Observation& o = obs[i];
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel(o.population, o.age, o.year, c.population, c.age, c.year);
    }
  }
  return k;
}

Eigen::MatrixXd prior_covariance(const std::vector<Cell>& cells,
                                 const KernelSpec& spec) {
  const KernelEvaluator kernel(spec, spec.population_count());
  const Eigen::Index n = static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Cell& a = cells[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i; j < n; ++j) {
      const Cell& b = cells[static_cast<std::size_t>(j)];
      const double v =
          kernel(a.population, a.age, a.year, b.population, b.age, b.year);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace mortgp
