#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mortgp/panel.hpp"

namespace mortgp {

enum class KernelFamily { kSogp, kFullRank, kIcm };

[[nodiscard]] std::string to_string(KernelFamily family);
[[nodiscard]] KernelFamily kernel_family_from_string(const std::string& name);

// Squared-exponential kernel over (age, year) with separate length scales:
// eta^2 * exp(-dag^2 / (2 theta_ag^2) - dyr^2 / (2 theta_yr^2)).
struct SEParams {
  double process_variance = 1.0;  // eta^2
  double length_age = 1.0;        // theta_ag
  double length_year = 1.0;       // theta_yr
};

[[nodiscard]] double se_covariance(double age_i, double year_i, double age_j,
                                   double year_j, const SEParams& params);

// Unit-variance SE Gram matrix over one coordinate axis.
[[nodiscard]] Eigen::MatrixXd se_gram(const std::vector<double>& coords,
                                      double length_scale);

// Cross-population log-distances theta_{l1 l2} for unordered pairs,
// stored for l1 < l2 in row-major order: (0,1), (0,2), ..., (1,2), ...
// The implied correlation is exp(-theta), 1 on the diagonal.
class CrossThetas {
 public:
  CrossThetas() = default;
  CrossThetas(int population_count, std::vector<double> values);

  [[nodiscard]] int population_count() const { return count_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] double at(int l1, int l2) const;
  [[nodiscard]] double correlation(int l1, int l2) const;
  [[nodiscard]] Eigen::MatrixXd correlation_matrix() const;

  static std::size_t pair_count(int population_count);

 private:
  int count_ = 0;
  std::vector<double> values_;
};

// Kernel and noise parameters for one model family.
//
//   kSogp:     one population; covariance eta^2 * SE.
//   kFullRank: eta^2 * SE * exp(-theta_{l1 l2}) across populations.
//   kIcm:      B = A A^T across populations times a unit-variance SE
//              (process_variance pinned to 1; scale lives in B's diagonal).
//
// noise_variances holds sigma_l^2, one entry per population.
struct KernelSpec {
  KernelFamily family = KernelFamily::kSogp;
  SEParams se;
  CrossThetas cross;         // kFullRank only
  Eigen::MatrixXd loadings;  // kIcm only, L x Q
  Eigen::VectorXd noise_variances;

  [[nodiscard]] int population_count() const {
    return static_cast<int>(noise_variances.size());
  }
  [[nodiscard]] int rank() const {
    return static_cast<int>(loadings.cols());
  }

  // Cross-population covariance factor B (1x1 [eta^2] for kSogp).
  [[nodiscard]] Eigen::MatrixXd cross_covariance() const;

  // Free kernel plus noise parameters (the kernel share of BIC's k).
  [[nodiscard]] int parameter_count() const;

  // Throws std::invalid_argument on family/payload mismatches, wrong
  // sizes, non-positive scales or variances, non-finite entries, or a
  // full-rank correlation matrix that is not positive semidefinite.
  void validate(int population_count) const;
};

// Validated pointwise evaluator; covariance between two observation inputs
// is B_{l_i l_j} times the unit-variance SE value.
class KernelEvaluator {
 public:
  KernelEvaluator(const KernelSpec& spec, int population_count);

  [[nodiscard]] double operator()(int pop_i, double age_i, double year_i,
                                  int pop_j, double age_j,
                                  double year_j) const;
  [[nodiscard]] const Eigen::MatrixXd& cross_covariance() const { return b_; }
  [[nodiscard]] const SEParams& se() const { return unit_se_; }

 private:
  SEParams unit_se_;
  Eigen::MatrixXd b_;
};

struct CovarianceMatrices {
  Eigen::MatrixXd latent;  // C
  Eigen::MatrixXd noisy;   // C + Sigma
};

// Dense training covariance in the panel's canonical order.
[[nodiscard]] CovarianceMatrices build_covariance(const MortalityPanel& panel,
                                                  const KernelSpec& spec);

// Latent cross-covariance between training rows and prediction cells.
[[nodiscard]] Eigen::MatrixXd cross_covariance_matrix(
    const MortalityPanel& panel, const std::vector<Cell>& cells,
    const KernelSpec& spec);

// Latent prior covariance between prediction cells.
[[nodiscard]] Eigen::MatrixXd prior_covariance(const std::vector<Cell>& cells,
                                               const KernelSpec& spec);

}  // namespace mortgp
