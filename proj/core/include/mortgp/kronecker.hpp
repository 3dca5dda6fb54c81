#pragma once

#include <optional>

#include <Eigen/Core>

#include "mortgp/gp.hpp"

namespace mortgp {

// Solver for A = B kron K + D kron I_N without forming the M x M matrix,
// where B is the L x L cross-population covariance, K the shared N x N
// input covariance, and D = diag(noise) the per-population variances.
//
// With S = D^(1/2), Bt = S^-1 B S^-1 = U Lam_B U^T and K = V Lam_K V^T:
//   A = (S kron I)(U kron V)(Lam_B kron Lam_K + I)(U kron V)^T (S kron I),
// so solves and the log-determinant cost O(L^3 + N^3 + L N (L + N)).
//
// Vectors follow the panel's canonical order: population-major blocks of
// length N. The grid constructor takes K = K_year kron K_age (year-major,
// age-minor within a population) and never forms the N x N matrix either.
class KroneckerNoiseSolver final : public CovarianceOperator {
 public:
  KroneckerNoiseSolver(const Eigen::MatrixXd& cross, const Eigen::MatrixXd& k,
                       const Eigen::VectorXd& noise);
  KroneckerNoiseSolver(const Eigen::MatrixXd& cross,
                       const Eigen::MatrixXd& k_year,
                       const Eigen::MatrixXd& k_age,
                       const Eigen::VectorXd& noise);

  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const override;
  [[nodiscard]] double log_det() const override { return log_det_; }
  [[nodiscard]] Eigen::Index dimension() const override {
    return populations_ * block_;
  }

 private:
  void factor(const Eigen::MatrixXd& cross, const Eigen::VectorXd& noise);
  [[nodiscard]] Eigen::MatrixXd input_basis_multiply(
      const Eigen::MatrixXd& block, bool transpose) const;

  Eigen::Index populations_ = 0;
  Eigen::Index block_ = 0;  // N
  Eigen::VectorXd noise_sqrt_;
  Eigen::MatrixXd cross_vectors_;   // U
  Eigen::VectorXd cross_values_;    // Lam_B
  Eigen::MatrixXd input_vectors_;   // V (plain constructor)
  std::optional<Eigen::MatrixXd> year_vectors_;  // grid constructor
  std::optional<Eigen::MatrixXd> age_vectors_;
  Eigen::VectorXd input_values_;    // Lam_K
  double log_det_ = 0.0;
};

// The profiled log marginal likelihood evaluated through the fast path:
// identical contract to profiled_log_likelihood over the dense build.
[[nodiscard]] MarginalLikelihood kronecker_log_likelihood(
    const Eigen::MatrixXd& cross, const Eigen::MatrixXd& k,
    const Eigen::VectorXd& noise, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& h);

}  // namespace mortgp
