#include "mortgp/kronecker.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mortgp {

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(
    const Eigen::MatrixXd& matrix, const char* what) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw std::invalid_argument(std::string("kronecker: ") + what +
                                " must be square and nonempty");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error(std::string("kronecker: eigendecomposition of ") +
                             what + " failed");
  }
  return eig;
}

void check_noise(const Eigen::VectorXd& noise) {
  if (noise.size() == 0 || noise.minCoeff() <= 0.0 || !noise.allFinite()) {
    throw std::invalid_argument(
        "kronecker: noise variances must be positive");
  }
}

}  // namespace

void KroneckerNoiseSolver::factor(const Eigen::MatrixXd& cross,
                                  const Eigen::VectorXd& noise) {
  check_noise(noise);
  if (cross.rows() != noise.size()) {
    throw std::invalid_argument(
        "kronecker: cross covariance and noise sizes differ");
  }
  populations_ = cross.rows();
  noise_sqrt_ = noise.array().sqrt();

  const Eigen::MatrixXd whitened =
      noise_sqrt_.cwiseInverse().asDiagonal() * cross *
      noise_sqrt_.cwiseInverse().asDiagonal();
  const auto eig = decompose(whitened, "whitened cross covariance");
  cross_vectors_ = eig.eigenvectors();
  cross_values_ = eig.eigenvalues();

  log_det_ = static_cast<double>(block_) * noise.array().log().sum();
  for (Eigen::Index l = 0; l < populations_; ++l) {
    for (Eigen::Index t = 0; t < block_; ++t) {
      const double v = cross_values_[l] * input_values_[t] + 1.0;
      if (!(v > 0.0)) {
        throw std::runtime_error(
            "kronecker: system eigenvalue not positive; inputs are not "
            "positive semidefinite");
      }
      log_det_ += std::log(v);
    }
  }
}

KroneckerNoiseSolver::KroneckerNoiseSolver(const Eigen::MatrixXd& cross,
                                           const Eigen::MatrixXd& k,
                                           const Eigen::VectorXd& noise) {
  const auto eig = decompose(k, "input covariance");
  input_vectors_ = eig.eigenvectors();
  input_values_ = eig.eigenvalues();
  block_ = k.rows();
  factor(cross, noise);
}

KroneckerNoiseSolver::KroneckerNoiseSolver(const Eigen::MatrixXd& cross,
                                           const Eigen::MatrixXd& k_year,
                                           const Eigen::MatrixXd& k_age,
                                           const Eigen::VectorXd& noise) {
  const auto eig_year = decompose(k_year, "year covariance");
  const auto eig_age = decompose(k_age, "age covariance");
  year_vectors_ = eig_year.eigenvectors();
  age_vectors_ = eig_age.eigenvectors();

  const Eigen::Index n_year = k_year.rows();
  const Eigen::Index n_age = k_age.rows();
  block_ = n_year * n_age;
  input_values_.resize(block_);
  for (Eigen::Index iy = 0; iy < n_year; ++iy) {
    for (Eigen::Index ia = 0; ia < n_age; ++ia) {
      input_values_[iy * n_age + ia] =
          eig_year.eigenvalues()[iy] * eig_age.eigenvalues()[ia];
    }
  }
  factor(cross, noise);
}

Eigen::MatrixXd KroneckerNoiseSolver::input_basis_multiply(
    const Eigen::MatrixXd& block, bool transpose) const {
  if (!year_vectors_.has_value()) {
    if (transpose) return input_vectors_.transpose() * block;
    return input_vectors_ * block;
  }
  // V = V_year kron V_age applied without materializing it: each column,
  // reshaped age-fastest to n_age x n_year, maps to V_age^T Z V_year.
  const Eigen::MatrixXd& vy = *year_vectors_;
  const Eigen::MatrixXd& va = *age_vectors_;
  const Eigen::Index n_age = va.rows();
  const Eigen::Index n_year = vy.rows();
  Eigen::MatrixXd out(block.rows(), block.cols());
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    const Eigen::Map<const Eigen::MatrixXd> z(block.col(c).data(), n_age,
                                              n_year);
    Eigen::Map<Eigen::MatrixXd> o(out.col(c).data(), n_age, n_year);
    if (transpose) {
      o = va.transpose() * z * vy;
    } else {
      o = va * z * vy.transpose();
    }
  }
  return out;
}

Eigen::MatrixXd KroneckerNoiseSolver::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dimension()) {
    throw std::invalid_argument("kronecker: right-hand side has " +
                                std::to_string(rhs.rows()) + " rows, expected " +
                                std::to_string(dimension()));
  }
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    // Population-major blocks: column l of the N x L matrix view.
    Eigen::MatrixXd w(block_, populations_);
    for (Eigen::Index l = 0; l < populations_; ++l) {
      w.col(l) = rhs.col(c).segment(l * block_, block_) / noise_sqrt_[l];
    }
    w = input_basis_multiply(w, true) * cross_vectors_;
    for (Eigen::Index l = 0; l < populations_; ++l) {
      for (Eigen::Index t = 0; t < block_; ++t) {
        w(t, l) /= cross_values_[l] * input_values_[t] + 1.0;
      }
    }
    w = input_basis_multiply(w, false) * cross_vectors_.transpose();
    for (Eigen::Index l = 0; l < populations_; ++l) {
      out.col(c).segment(l * block_, block_) = w.col(l) / noise_sqrt_[l];
    }
  }
  return out;
}

MarginalLikelihood kronecker_log_likelihood(const Eigen::MatrixXd& cross,
                                            const Eigen::MatrixXd& k,
                                            const Eigen::VectorXd& noise,
                                            const Eigen::VectorXd& y,
                                            const Eigen::MatrixXd& h) {
  const KroneckerNoiseSolver solver(cross, k, noise);
  return profiled_log_likelihood(solver, y, h);
}

}  // namespace mortgp
