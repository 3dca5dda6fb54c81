#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mortgp/kernels.hpp"
#include "mortgp/mean.hpp"
#include "mortgp/panel.hpp"

namespace mortgp {

// Abstract view of the noisy training covariance C + Sigma: right-hand-side
// solves and the log-determinant, however the factorization is realized.
class CovarianceOperator {
 public:
  virtual ~CovarianceOperator() = default;
  [[nodiscard]] virtual Eigen::MatrixXd solve(
      const Eigen::MatrixXd& rhs) const = 0;
  [[nodiscard]] virtual double log_det() const = 0;
  [[nodiscard]] virtual Eigen::Index dimension() const = 0;
};

// Cholesky factorization with the escalating jitter policy: on failure add
// 1e-10 * mean(diag) to the diagonal, escalate tenfold up to 1e-6 *
// mean(diag), then throw a conditioning error.
class DenseCovariance final : public CovarianceOperator {
 public:
  explicit DenseCovariance(Eigen::MatrixXd matrix);

  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const override;
  [[nodiscard]] double log_det() const override;
  [[nodiscard]] Eigen::Index dimension() const override { return dim_; }
  [[nodiscard]] double applied_jitter() const { return jitter_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::Index dim_ = 0;
  double jitter_ = 0.0;
};

struct GlsEstimate {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // (H^T (C+Sigma)^-1 H)^-1
};

struct MarginalLikelihood {
  double log_likelihood = 0.0;
  GlsEstimate gls;          // empty when H has no columns
  Eigen::VectorXd alpha;    // (C+Sigma)^-1 (y - H beta)
};

// Profiled Gaussian log marginal likelihood
//   -1/2 r^T A^-1 r - 1/2 log|A| - M/2 log(2 pi),  r = y - H beta_hat,
// with beta_hat the GLS estimate (profiled out exactly). H may have zero
// columns, in which case r = y. Rank-deficient H throws, naming the
// collinear columns when labels are supplied.
[[nodiscard]] MarginalLikelihood profiled_log_likelihood(
    const CovarianceOperator& cov, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& h,
    const std::vector<std::string>* column_labels = nullptr);

struct PredictionSummary {
  std::vector<Cell> cells;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd_latent;     // posterior sd of the noise-free surface
  Eigen::VectorXd sd_observed;   // adds the cell's population noise
  Eigen::MatrixXd joint_latent;  // full posterior covariance when requested
};

struct PosteriorOptions {
  enum class Path { kAuto, kDense, kKronecker };
  // When false, the supplied MeanModel coefficients are treated as known:
  // no GLS step and no mean-uncertainty term in the predictive variance.
  bool estimate_mean = true;
  Path path = Path::kAuto;
};

// Immutable exact-GP posterior over a panel. The factorization, GLS trend
// estimate, and residual weights are cached at construction; predictions
// are const and safe to run concurrently.
//
// On isotropic panels with positive noise the covariance solves use the
// Kronecker eigendecomposition fast path; forcing it on a non-isotropic
// panel is a contract violation (std::logic_error).
class Posterior {
 public:
  Posterior(MortalityPanel panel, KernelSpec spec, MeanModel mean,
            PosteriorOptions options = {});

  [[nodiscard]] double log_marginal_likelihood() const { return loglik_; }
  [[nodiscard]] const MeanModel& mean_model() const { return mean_; }
  [[nodiscard]] const GlsEstimate& gls() const;
  [[nodiscard]] const MortalityPanel& panel() const { return panel_; }
  [[nodiscard]] const KernelSpec& kernel() const { return spec_; }
  [[nodiscard]] bool used_kronecker() const { return used_kronecker_; }
  [[nodiscard]] double applied_jitter() const { return jitter_; }

  // Universal-kriging prediction: mean h(x*)^T beta + c*^T alpha and
  // variance C(x*,x*) - c*^T A^-1 c* + u^T (H^T A^-1 H)^-1 u with
  // u = h(x*) - H^T A^-1 c* (the last term only when the mean was
  // estimated). want_joint fills the full posterior covariance.
  [[nodiscard]] PredictionSummary predict(const std::vector<Cell>& cells,
                                          bool want_joint = false) const;

 private:
  MortalityPanel panel_;
  KernelSpec spec_;
  MeanModel mean_;
  bool estimate_mean_ = true;
  bool used_kronecker_ = false;
  double jitter_ = 0.0;
  std::unique_ptr<CovarianceOperator> cov_;
  Eigen::MatrixXd h_free_;  // GLS basis; kFixedYear reduces to the S1 basis
  GlsEstimate gls_;
  Eigen::VectorXd alpha_;
  double loglik_ = 0.0;
};

// Standard normal stream: mt19937_64 plus an explicit Box-Muller transform,
// so draws are identical across standard library implementations.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed);
  double operator()();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// n_paths draws from MVN(summary.mean, summary.joint_latent) via Cholesky
// with the jitter policy; rows are paths. Requires the joint covariance.
// A zero covariance yields every path equal to the mean.
[[nodiscard]] Eigen::MatrixXd sample_posterior(const PredictionSummary& summary,
                                               int n_paths,
                                               std::uint64_t seed);

}  // namespace mortgp
