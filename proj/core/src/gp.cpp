#include "mortgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "mortgp/kronecker.hpp"

namespace mortgp {

DenseCovariance::DenseCovariance(Eigen::MatrixXd matrix) : dim_(matrix.rows()) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw std::invalid_argument("covariance: matrix must be square");
  }
  const double mean_diag = matrix.diagonal().mean();
  double relative = 0.0;
  while (true) {
    llt_.compute(matrix + relative * mean_diag *
                              Eigen::MatrixXd::Identity(dim_, dim_));
    if (llt_.info() == Eigen::Success) {
      jitter_ = relative * mean_diag;
      return;
    }
    relative = relative == 0.0 ? 1e-10 : relative * 10.0;
    if (relative > 1e-6) {
      throw std::runtime_error(
          "covariance: factorization failed after jitter escalation");
    }
  }
}

Eigen::MatrixXd DenseCovariance::solve(const Eigen::MatrixXd& rhs) const {
  return llt_.solve(rhs);
}

double DenseCovariance::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

MarginalLikelihood profiled_log_likelihood(
    const CovarianceOperator& cov, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& h, const std::vector<std::string>* column_labels) {
  const Eigen::Index m = y.size();
  if (cov.dimension() != m) {
    throw std::invalid_argument("likelihood: covariance dimension " +
                                std::to_string(cov.dimension()) +
                                " does not match " + std::to_string(m) +
                                " targets");
  }
  if (h.rows() != m && h.cols() > 0) {
    throw std::invalid_argument("likelihood: basis rows do not match targets");
  }

  MarginalLikelihood out;
  const Eigen::Index p = h.cols();
  Eigen::VectorXd residual;
  if (p > 0) {
    const Eigen::MatrixXd ai_h = cov.solve(h);
    const Eigen::VectorXd ai_y = cov.solve(y);
    const Eigen::MatrixXd gram = h.transpose() * ai_h;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      std::string msg = "likelihood: mean basis is rank deficient";
      if (column_labels != nullptr &&
          static_cast<Eigen::Index>(column_labels->size()) == p) {
        msg += "; collinear columns:";
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) {
          msg += " " + (*column_labels)[static_cast<std::size_t>(perm[k])];
        }
      }
      throw std::runtime_error(msg);
    }

    out.gls.beta = qr.solve(h.transpose() * ai_y);
    out.gls.covariance = qr.solve(Eigen::MatrixXd::Identity(p, p));
    // Symmetrize the solve result; it is an inverse of a symmetric matrix.
    out.gls.covariance =
        0.5 * (out.gls.covariance + out.gls.covariance.transpose()).eval();
    residual = y - h * out.gls.beta;
    out.alpha = ai_y - ai_h * out.gls.beta;
  } else {
    residual = y;
    out.alpha = cov.solve(y);
  }

  out.log_likelihood = -0.5 * residual.dot(out.alpha) - 0.5 * cov.log_det() -
                       0.5 * static_cast<double>(m) *
                           std::log(2.0 * std::numbers::pi);
  return out;
}

namespace {

// Fitted/pinned coefficients for the full basis, with the kFixedYear slope
// spliced back between the age column and the population dummies.
Eigen::VectorXd assemble_full_beta(const MeanModel& mean,
                                   const Eigen::VectorXd& free_beta) {
  if (mean.scenario != TrendScenario::kFixedYear) return free_beta;
  Eigen::VectorXd full(free_beta.size() + 1);
  full[0] = free_beta[0];
  full[1] = free_beta[1];
  full[2] = mean.year_slope();
  full.tail(free_beta.size() - 2) = free_beta.tail(free_beta.size() - 2);
  return full;
}

void validate_cells(const std::vector<Cell>& cells, int population_count) {
  if (cells.empty()) {
    throw std::invalid_argument("predict: no cells requested");
  }
  for (const Cell& c : cells) {
    if (c.population < 0 || c.population >= population_count) {
      throw std::invalid_argument("predict: unknown population index " +
                                  std::to_string(c.population));
    }
    if (!std::isfinite(c.age) || !std::isfinite(c.year)) {
      throw std::invalid_argument("predict: non-finite cell coordinates");
    }
  }
}

}  // namespace

Posterior::Posterior(MortalityPanel panel, KernelSpec spec, MeanModel mean,
                     PosteriorOptions options)
    : panel_(std::move(panel)),
      spec_(std::move(spec)),
      mean_(std::move(mean)),
      estimate_mean_(options.estimate_mean) {
  const int count = panel_.population_count();
  spec_.validate(count);

  using Path = PosteriorOptions::Path;
  const bool positive_noise = spec_.noise_variances.minCoeff() > 0.0;
  bool use_kronecker = false;
  if (options.path == Path::kKronecker) {
    if (!panel_.isotropic()) {
      throw std::logic_error(
          "posterior: Kronecker path requires an isotropic panel");
    }
    if (!positive_noise) {
      throw std::invalid_argument(
          "posterior: Kronecker path requires positive noise variances");
    }
    use_kronecker = true;
  } else if (options.path == Path::kAuto) {
    use_kronecker = panel_.isotropic() && positive_noise;
  }

  if (use_kronecker) {
    cov_ = std::make_unique<KroneckerNoiseSolver>(
        spec_.cross_covariance(),
        se_gram(panel_.grid_years(), spec_.se.length_year),
        se_gram(panel_.grid_ages(), spec_.se.length_age),
        spec_.noise_variances);
    used_kronecker_ = true;
  } else {
    auto dense = std::make_unique<DenseCovariance>(
        build_covariance(panel_, spec_).noisy);
    jitter_ = dense->applied_jitter();
    cov_ = std::move(dense);
  }

  const Eigen::VectorXd y = panel_.targets();
  if (estimate_mean_) {
    const TrendScenario gls_scenario =
        mean_.scenario == TrendScenario::kFixedYear ? TrendScenario::kFlat
                                                    : mean_.scenario;
    h_free_ = mean_basis_matrix(gls_scenario, count, panel_);

    Eigen::VectorXd y_adj = y;
    if (mean_.scenario == TrendScenario::kFixedYear) {
      const double slope = mean_.year_slope();
      for (std::size_t i = 0; i < panel_.observations().size(); ++i) {
        y_adj[static_cast<Eigen::Index>(i)] -=
            slope * panel_.observations()[i].year;
      }
    }

    std::vector<std::string> labels =
        mean_term_names(gls_scenario, panel_.populations());
    const MarginalLikelihood ml =
        profiled_log_likelihood(*cov_, y_adj, h_free_, &labels);
    gls_ = ml.gls;
    alpha_ = ml.alpha;
    loglik_ = ml.log_likelihood;
    mean_.beta = assemble_full_beta(mean_, gls_.beta);
  } else {
    if (!mean_.fitted() ||
        mean_.beta.size() != mean_dimension(mean_.scenario, count)) {
      throw std::invalid_argument(
          "posterior: fixed-mean prediction needs a full coefficient vector");
    }
    h_free_.resize(static_cast<Eigen::Index>(panel_.size()), 0);
    Eigen::VectorXd residual(static_cast<Eigen::Index>(panel_.size()));
    for (std::size_t i = 0; i < panel_.observations().size(); ++i) {
      const Observation& o = panel_.observations()[i];
      residual[static_cast<Eigen::Index>(i)] =
          o.log_rate - mean_value(mean_, count, o.population, o.age, o.year);
    }
    const MarginalLikelihood ml =
        profiled_log_likelihood(*cov_, residual, h_free_);
    alpha_ = ml.alpha;
    loglik_ = ml.log_likelihood;
  }
}

const GlsEstimate& Posterior::gls() const {
  if (!estimate_mean_) {
    throw std::logic_error("posterior: mean was fixed, no GLS estimate");
  }
  return gls_;
}

PredictionSummary Posterior::predict(const std::vector<Cell>& cells,
                                     bool want_joint) const {
  const int count = panel_.population_count();
  validate_cells(cells, count);
  const Eigen::Index n = static_cast<Eigen::Index>(cells.size());

  const Eigen::MatrixXd c_star = cross_covariance_matrix(panel_, cells, spec_);
  const Eigen::MatrixXd ai_c = cov_->solve(c_star);
  const Eigen::MatrixXd b = spec_.cross_covariance();

  PredictionSummary out;
  out.cells = cells;
  out.mean.resize(n);
  out.sd_latent.resize(n);
  out.sd_observed.resize(n);

  // Mean-uncertainty direction u = h(x*) - H^T A^-1 c* per cell.
  Eigen::MatrixXd u;
  if (estimate_mean_ && h_free_.cols() > 0) {
    const TrendScenario gls_scenario =
        mean_.scenario == TrendScenario::kFixedYear ? TrendScenario::kFlat
                                                    : mean_.scenario;
    const Eigen::MatrixXd h_star =
        mean_basis_matrix(gls_scenario, count, cells);
    u = h_star.transpose() - h_free_.transpose() * ai_c;  // p x n
  }

  auto prior_variance = [&](const Cell& c) {
    return b(c.population, c.population);
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const Cell& c = cells[static_cast<std::size_t>(i)];
    out.mean[i] = mean_value(mean_, count, c.population, c.age, c.year) +
                  c_star.col(i).dot(alpha_);
    double variance = prior_variance(c) - c_star.col(i).dot(ai_c.col(i));
    if (u.size() > 0) {
      variance += u.col(i).dot(gls_.covariance * u.col(i));
    }
    const double scale = prior_variance(c) + 1e-12;
    if (variance < 0.0) {
      if (variance < -1e-6 * scale) {
        throw std::runtime_error(
            "predict: negative posterior variance, covariance is too "
            "ill-conditioned");
      }
      variance = 0.0;
    }
    out.sd_latent[i] = std::sqrt(variance);
    out.sd_observed[i] =
        std::sqrt(variance + spec_.noise_variances[c.population]);
  }

  if (want_joint) {
    Eigen::MatrixXd joint =
        prior_covariance(cells, spec_) - c_star.transpose() * ai_c;
    if (u.size() > 0) {
      joint += u.transpose() * gls_.covariance * u;
    }
    joint = 0.5 * (joint + joint.transpose()).eval();
    // Keep the diagonal consistent with the clamped per-cell variances.
    for (Eigen::Index i = 0; i < n; ++i) {
      joint(i, i) = out.sd_latent[i] * out.sd_latent[i];
    }
    out.joint_latent = std::move(joint);
  }
  return out;
}

NormalSampler::NormalSampler(std::uint64_t seed) : engine_(seed) {}

double NormalSampler::operator()() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller on uniforms in (0, 1]; arithmetic only, so streams are
  // reproducible across standard libraries.
  const double u1 =
      (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 =
      (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

Eigen::MatrixXd sample_posterior(const PredictionSummary& summary, int n_paths,
                                 std::uint64_t seed) {
  const Eigen::Index n = summary.mean.size();
  if (summary.joint_latent.rows() != n || summary.joint_latent.cols() != n) {
    throw std::invalid_argument(
        "sample: prediction carries no joint covariance");
  }
  if (n_paths < 1) {
    throw std::invalid_argument("sample: need at least one path");
  }

  Eigen::MatrixXd root = Eigen::MatrixXd::Zero(n, n);
  if (summary.joint_latent.cwiseAbs().maxCoeff() > 0.0) {
    const Eigen::MatrixXd& matrix = summary.joint_latent;
    const double mean_diag = matrix.diagonal().mean();
    double relative = 0.0;
    while (true) {
      Eigen::LLT<Eigen::MatrixXd> llt(
          matrix + relative * mean_diag * Eigen::MatrixXd::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        root = llt.matrixL();
        break;
      }
      relative = relative == 0.0 ? 1e-10 : relative * 10.0;
      if (relative > 1e-6) {
        throw std::runtime_error(
            "sample: covariance not positive definite after jitter");
      }
    }
  }

  NormalSampler normal(seed);
  Eigen::MatrixXd paths(n_paths, n);
  Eigen::VectorXd z(n);
  for (int p = 0; p < n_paths; ++p) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    paths.row(p) = (summary.mean + root * z).transpose();
  }
  return paths;
}

}  // namespace mortgp
