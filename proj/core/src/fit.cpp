#include "mortgp/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "mortgp/kronecker.hpp"

namespace mortgp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Optimizer coordinates, standardized input scale. Positive parameters
// ride on the log scale; ICM loadings are raw.
//   kSogp:     [log th_ag, log th_yr, log eta2, log sg2]
//   kFullRank: [log th_ag, log th_yr, log eta2, P x log th_cross, L x log sg2]
//   kIcm:      [log th_ag, log th_yr, L*Q loadings (column-major), L x log sg2]
struct Layout {
  int dim = 0;
  int cross_offset = -1;
  int loading_offset = -1;
  int noise_offset = 0;
  int pair_count = 0;
};

Layout make_layout(KernelFamily family, int populations, int rank) {
  Layout layout;
  switch (family) {
    case KernelFamily::kSogp:
      layout.noise_offset = 3;
      break;
    case KernelFamily::kFullRank:
      layout.pair_count =
          static_cast<int>(CrossThetas::pair_count(populations));
      layout.cross_offset = 3;
      layout.noise_offset = 3 + layout.pair_count;
      break;
    case KernelFamily::kIcm:
      layout.loading_offset = 2;
      layout.noise_offset = 2 + populations * rank;
      break;
  }
  layout.dim = layout.noise_offset + populations;
  return layout;
}

KernelSpec build_spec(KernelFamily family, int populations, int rank,
                      const Layout& layout, const Eigen::VectorXd& x) {
  KernelSpec spec;
  spec.family = family;
  spec.se.length_age = std::exp(x[0]);
  spec.se.length_year = std::exp(x[1]);
  spec.noise_variances.resize(populations);
  for (int l = 0; l < populations; ++l) {
    spec.noise_variances[l] = std::exp(x[layout.noise_offset + l]);
  }
  switch (family) {
    case KernelFamily::kSogp:
      spec.se.process_variance = std::exp(x[2]);
      break;
    case KernelFamily::kFullRank: {
      spec.se.process_variance = std::exp(x[2]);
      std::vector<double> values(static_cast<std::size_t>(layout.pair_count));
      for (int p = 0; p < layout.pair_count; ++p) {
        values[static_cast<std::size_t>(p)] =
            std::exp(x[layout.cross_offset + p]);
      }
      spec.cross = CrossThetas(populations, std::move(values));
      break;
    }
    case KernelFamily::kIcm: {
      spec.se.process_variance = 1.0;
      spec.loadings.resize(populations, rank);
      for (int q = 0; q < rank; ++q) {
        for (int l = 0; l < populations; ++l) {
          spec.loadings(l, q) = x[layout.loading_offset + q * populations + l];
        }
      }
      break;
    }
  }
  return spec;
}

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

double log_inverse_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

double log_half_normal_density(double x, double sd) {
  return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(sd) -
         x * x / (2.0 * sd * sd);
}

struct Objective {
  const MortalityPanel& panel;  // standardized inputs
  KernelFamily family;
  int populations;
  int rank;
  Layout layout;
  const Eigen::MatrixXd& h_free;
  const Eigen::VectorXd& y_adj;
  bool use_kronecker;
  const PriorSpec& priors;

  [[nodiscard]] MarginalLikelihood likelihood(const KernelSpec& spec) const {
    if (use_kronecker) {
      const KroneckerNoiseSolver op(
          spec.cross_covariance(),
          se_gram(panel.grid_years(), spec.se.length_year),
          se_gram(panel.grid_ages(), spec.se.length_age),
          spec.noise_variances);
      return profiled_log_likelihood(op, y_adj, h_free);
    }
    const DenseCovariance op(build_covariance(panel, spec).noisy);
    return profiled_log_likelihood(op, y_adj, h_free);
  }

  [[nodiscard]] double log_prior(const KernelSpec& spec,
                                 const Eigen::VectorXd& beta) const {
    double total = 0.0;
    if (priors.intercept) {
      total += log_normal_density(beta[0], priors.intercept->mean,
                                  priors.intercept->sd);
    }
    if (priors.age_slope) {
      total += log_normal_density(beta[1], priors.age_slope->mean,
                                  priors.age_slope->sd);
    }
    if (priors.length_scale) {
      total += log_inverse_gamma_density(spec.se.length_age,
                                         priors.length_scale->shape,
                                         priors.length_scale->rate);
      total += log_inverse_gamma_density(spec.se.length_year,
                                         priors.length_scale->shape,
                                         priors.length_scale->rate);
    }
    if (priors.log_process_variance && family != KernelFamily::kIcm) {
      total += log_normal_density(std::log(spec.se.process_variance),
                                  priors.log_process_variance->mean,
                                  priors.log_process_variance->sd);
    }
    if (priors.noise_variance) {
      for (int l = 0; l < populations; ++l) {
        total += log_half_normal_density(spec.noise_variances[l],
                                         priors.noise_variance->sd);
      }
    }
    if (priors.log_cross_theta && family == KernelFamily::kFullRank) {
      for (double theta : spec.cross.values()) {
        total += log_normal_density(std::log(theta),
                                    priors.log_cross_theta->mean,
                                    priors.log_cross_theta->sd);
      }
    }
    return total;
  }

  [[nodiscard]] double operator()(const Eigen::VectorXd& x_box) const {
    const KernelSpec spec =
        build_spec(family, populations, rank, layout, x_box);
    if (family == KernelFamily::kFullRank && populations >= 3) {
      // Pairwise distances need not form a valid correlation matrix;
      // penalize rather than reject so the simplex is steered back.
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
          spec.cross.correlation_matrix(), Eigen::EigenvaluesOnly);
      const double min_eig = eig.eigenvalues().minCoeff();
      if (min_eig < -1e-8) {
        return 1e10 * (1.0 + std::abs(min_eig));
      }
    }
    try {
      const MarginalLikelihood ml = likelihood(spec);
      double value = -ml.log_likelihood;
      if (!priors.flat()) {
        value -= log_prior(spec, ml.gls.beta);
      }
      return std::isfinite(value) ? value : kInf;
    } catch (const std::exception&) {
      return kInf;  // conditioning failure rejects the point
    }
  }
};

void check_bounds(const ParameterBounds& b) {
  const bool ok =
      b.length_scale_min > 0 && b.length_scale_min < b.length_scale_max &&
      b.process_variance_min > 0 &&
      b.process_variance_min < b.process_variance_max &&
      b.noise_variance_min > 0 &&
      b.noise_variance_min < b.noise_variance_max && b.cross_theta_min > 0 &&
      b.cross_theta_min < b.cross_theta_max && b.loading_limit > 0;
  if (!ok) {
    throw std::invalid_argument(
        "parameter bounds must be positive ordered intervals");
  }
}

void validate_request(const MortalityPanel& panel, KernelFamily family,
                      int rank, const MeanModel& mean,
                      const OptimizerConfig& config) {
  const int populations = panel.population_count();
  if (family == KernelFamily::kSogp && populations != 1) {
    throw std::invalid_argument(
        "single-output family requires exactly one population");
  }
  if (family == KernelFamily::kIcm) {
    if (rank < 1 || rank > populations) {
      throw std::invalid_argument(
          "coregionalization rank must lie in [1, population count]");
    }
  } else if (rank != 0) {
    throw std::invalid_argument("rank applies to the ICM family only");
  }
  if (mean.scenario == TrendScenario::kFixedYear &&
      !(std::isfinite(mean.improvement_rate) && mean.improvement_rate > 0)) {
    throw std::invalid_argument(
        "fixed-trend scenario requires a positive improvement rate");
  }
  if (config.n_starts < 1) {
    throw std::invalid_argument("n_starts must be positive");
  }
  if (config.nelder_mead.max_iterations < 1 ||
      !(config.nelder_mead.tolerance > 0) ||
      !(config.nelder_mead.initial_step > 0)) {
    throw std::invalid_argument("invalid simplex options");
  }
  check_bounds(config.bounds);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Desired start window clipped to the hard box; degenerates to the nearest
// admissible point when disjoint.
Interval clip(double desired_lo, double desired_hi, double bound_lo,
              double bound_hi) {
  Interval out{std::max(desired_lo, bound_lo), std::min(desired_hi, bound_hi)};
  if (!(out.lo <= out.hi)) {
    const double mid = 0.5 * (desired_lo + desired_hi);
    const double pinned = std::clamp(mid, bound_lo, bound_hi);
    out = {pinned, pinned};
  }
  return out;
}

struct SearchBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd start_lo;
  Eigen::VectorXd start_hi;
};

// Hard box from the configured bounds; start windows centered on scales
// suggested by the data (vy is the trend-residual variance of y).
SearchBox make_search_box(KernelFamily family, int populations, int rank,
                          const Layout& layout, const ParameterBounds& bounds,
                          double vy) {
  SearchBox box;
  box.lower.resize(layout.dim);
  box.upper.resize(layout.dim);
  box.start_lo.resize(layout.dim);
  box.start_hi.resize(layout.dim);

  const double sy = std::sqrt(vy);
  const auto set = [&](int i, double blo, double bhi, double slo, double shi) {
    box.lower[i] = blo;
    box.upper[i] = bhi;
    const Interval window = clip(slo, shi, blo, bhi);
    box.start_lo[i] = window.lo;
    box.start_hi[i] = window.hi;
  };

  for (int i = 0; i < 2; ++i) {
    set(i, std::log(bounds.length_scale_min), std::log(bounds.length_scale_max),
        std::log(0.2), std::log(3.0));
  }
  if (family != KernelFamily::kIcm) {
    set(2, std::log(bounds.process_variance_min),
        std::log(bounds.process_variance_max), std::log(0.2 * vy),
        std::log(2.0 * vy));
  }
  if (family == KernelFamily::kFullRank) {
    for (int p = 0; p < layout.pair_count; ++p) {
      set(layout.cross_offset + p, std::log(bounds.cross_theta_min),
          std::log(bounds.cross_theta_max), std::log(0.05), std::log(1.0));
    }
  }
  if (family == KernelFamily::kIcm) {
    for (int q = 0; q < rank; ++q) {
      for (int l = 0; l < populations; ++l) {
        const int i = layout.loading_offset + q * populations + l;
        if (q == 0) {
          set(i, -bounds.loading_limit, bounds.loading_limit, 0.3 * sy,
              1.2 * sy);
        } else {
          set(i, -bounds.loading_limit, bounds.loading_limit, -0.6 * sy,
              0.6 * sy);
        }
      }
    }
  }
  for (int l = 0; l < populations; ++l) {
    set(layout.noise_offset + l, std::log(bounds.noise_variance_min),
        std::log(bounds.noise_variance_max), std::log(0.02 * vy),
        std::log(0.5 * vy));
  }
  return box;
}

// Signs and column order of A are not identified (B = A A^T); pick the
// representative with columns in descending norm and a positive leading
// nonzero entry per column.
void canonicalize_loadings(Eigen::MatrixXd& loadings) {
  const int cols = static_cast<int>(loadings.cols());
  std::vector<int> order(static_cast<std::size_t>(cols));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> norms(static_cast<std::size_t>(cols));
  for (int q = 0; q < cols; ++q) {
    norms[static_cast<std::size_t>(q)] = loadings.col(q).norm();
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return norms[static_cast<std::size_t>(a)] >
           norms[static_cast<std::size_t>(b)];
  });
  Eigen::MatrixXd sorted(loadings.rows(), cols);
  for (int j = 0; j < cols; ++j) {
    sorted.col(j) = loadings.col(order[static_cast<std::size_t>(j)]);
  }
  for (int j = 0; j < cols; ++j) {
    for (Eigen::Index l = 0; l < sorted.rows(); ++l) {
      if (std::abs(sorted(l, j)) > 1e-12) {
        if (sorted(l, j) < 0) {
          sorted.col(j) = -sorted.col(j);
        }
        break;
      }
    }
  }
  loadings = std::move(sorted);
}

FittedModel fit_model(const MortalityPanel& panel, KernelFamily family,
                      int rank, const MeanModel& mean, const PriorSpec& priors,
                      const OptimizerConfig& config) {
  validate_request(panel, family, rank, mean, config);
  const int populations = panel.population_count();
  const auto [panel_std, scaling] = standardize(panel);

  // The pinned year slope becomes a data offset; GLS then sees the flat
  // basis. The offset uses raw years, the slope being per calendar year.
  const TrendScenario gls_scenario = mean.scenario == TrendScenario::kFixedYear
                                         ? TrendScenario::kFlat
                                         : mean.scenario;
  const Eigen::MatrixXd h_free =
      mean_basis_matrix(gls_scenario, populations, panel_std);
  Eigen::VectorXd y_adj = panel_std.targets();
  if (mean.scenario == TrendScenario::kFixedYear) {
    const std::vector<Observation>& raw = panel.observations();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      y_adj[static_cast<Eigen::Index>(i)] +=
          mean.improvement_rate * raw[i].year;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h_free);
  qr.setThreshold(1e-10);
  if (qr.rank() < h_free.cols()) {
    const std::vector<std::string> names =
        mean_term_names(gls_scenario, panel.populations());
    std::ostringstream message;
    message << "mean basis is rank deficient; collinear columns:";
    const Eigen::VectorXi perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < h_free.cols(); ++j) {
      message << ' ' << names[static_cast<std::size_t>(perm[j])];
    }
    throw std::runtime_error(message.str());
  }

  double vy;
  if (h_free.rows() > h_free.cols()) {
    const Eigen::VectorXd resid = y_adj - h_free * qr.solve(y_adj);
    vy = resid.squaredNorm() /
         static_cast<double>(h_free.rows() - h_free.cols());
  } else {
    const double mean_y = y_adj.mean();
    vy = (y_adj.array() - mean_y).square().sum() /
         std::max<double>(1.0, static_cast<double>(y_adj.size()) - 1.0);
  }
  vy = std::max(vy, 1e-6);

  const bool use_kronecker = !config.force_dense && panel_std.isotropic();
  const Layout layout = make_layout(family, populations, rank);
  const SearchBox box =
      make_search_box(family, populations, rank, layout, config.bounds, vy);
  const BoxTransform transform{box.lower, box.upper};
  const Objective objective{panel_std, family,        populations,
                            rank,      layout,        h_free,
                            y_adj,     use_kronecker, priors};
  const auto wrapped = [&](const Eigen::VectorXd& t) {
    return objective(transform.to_box(t));
  };

  const std::vector<Eigen::VectorXd> draws =
      scrambled_halton(config.n_starts, layout.dim, config.seed);
  FitDiagnostics diagnostics;
  diagnostics.seed = config.seed;
  diagnostics.n_starts = config.n_starts;
  NelderMeadResult best;
  best.value = kInf;
  for (int s = 0; s < config.n_starts; ++s) {
    const Eigen::VectorXd x0 =
        box.start_lo.array() +
        draws[static_cast<std::size_t>(s)].array() *
            (box.start_hi - box.start_lo).array();
    StartDiagnostic start;
    start.index = s;
    start.objective = objective(x0);
    if (!std::isfinite(start.objective)) {
      start.error = "objective not finite at start point";
      diagnostics.starts.push_back(std::move(start));
      continue;
    }
    const NelderMeadResult result = nelder_mead(
        wrapped, transform.to_unconstrained(x0), config.nelder_mead);
    start.objective = result.value;
    start.iterations = result.iterations;
    start.converged = result.converged;
    start.usable = std::isfinite(result.value);
    if (start.usable && result.value < best.value) {
      best = result;
      diagnostics.best_start = s;
    }
    diagnostics.starts.push_back(std::move(start));
  }
  if (diagnostics.best_start < 0) {
    throw std::runtime_error(
        "optimization failed: no start produced a finite objective");
  }
  diagnostics.converged =
      diagnostics.starts[static_cast<std::size_t>(diagnostics.best_start)]
          .converged;
  diagnostics.best_trace = std::move(best.best_trace);

  // Back-transform: length scales pick up the input sd, every other kernel
  // parameter is scale-free. The mean is re-profiled on the raw panel.
  const Eigen::VectorXd x_hat = transform.to_box(best.x);
  KernelSpec kernel = build_spec(family, populations, rank, layout, x_hat);
  kernel.se.length_age *= scaling.age_sd;
  kernel.se.length_year *= scaling.year_sd;
  if (family == KernelFamily::kIcm) {
    canonicalize_loadings(kernel.loadings);
  }

  PosteriorOptions options;
  options.estimate_mean = true;
  options.path = config.force_dense ? PosteriorOptions::Path::kDense
                                    : PosteriorOptions::Path::kAuto;
  MeanModel unfitted;
  unfitted.scenario = mean.scenario;
  unfitted.improvement_rate = mean.improvement_rate;
  const Posterior posterior(panel, kernel, unfitted, options);

  FittedModel model;
  model.populations = panel.populations();
  model.kernel = std::move(kernel);
  model.mean = posterior.mean_model();
  model.scaling = scaling;
  model.log_likelihood = posterior.log_marginal_likelihood();
  model.parameter_count =
      model.kernel.parameter_count() +
      free_mean_parameter_count(mean.scenario, populations);
  model.bic = bic(model.log_likelihood, model.parameter_count, panel.size());
  model.panel_digest = panel.digest_hex();
  model.diagnostics = std::move(diagnostics);
  return model;
}

}  // namespace

PriorSpec PriorSpec::mortality_defaults() {
  PriorSpec priors;
  priors.intercept = NormalPrior{-4.0, 0.5};
  priors.age_slope = NormalPrior{0.0, 0.5};
  priors.length_scale = InverseGammaPrior{9.0, 12.0};
  priors.log_process_variance = NormalPrior{-3.0, 1.0};
  priors.noise_variance = HalfNormalPrior{0.5};
  priors.log_cross_theta = NormalPrior{-1.0, 1.0};
  return priors;
}

double bic(double log_likelihood, int parameter_count,
           std::size_t n_observations) {
  return parameter_count * std::log(static_cast<double>(n_observations)) -
         2.0 * log_likelihood;
}

FittedModel fit_mle(const MortalityPanel& panel, KernelFamily family,
                    int rank, const MeanModel& mean,
                    const OptimizerConfig& config) {
  return fit_model(panel, family, rank, mean, PriorSpec{}, config);
}

FittedModel fit_map(const MortalityPanel& panel, KernelFamily family,
                    int rank, const MeanModel& mean, const PriorSpec& priors,
                    const OptimizerConfig& config) {
  return fit_model(panel, family, rank, mean, priors, config);
}

RankSelection select_rank(const MortalityPanel& panel,
                          const std::vector<int>& rank_candidates,
                          const MeanModel& mean, const OptimizerConfig& config,
                          const PriorSpec& priors) {
  if (rank_candidates.empty()) {
    throw std::invalid_argument("rank selection needs at least one candidate");
  }
  const int populations = panel.population_count();
  std::vector<int> ranks = rank_candidates;
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  for (int q : ranks) {
    if (q < 1 || q > populations) {
      std::ostringstream message;
      message << "rank candidate " << q << " outside [1, " << populations
              << "]";
      throw std::invalid_argument(message.str());
    }
  }

  RankSelection selection;
  bool have_best = false;
  for (int q : ranks) {
    RankCandidate candidate;
    candidate.rank = q;
    try {
      FittedModel model =
          fit_map(panel, KernelFamily::kIcm, q, mean, priors, config);
      candidate.succeeded = true;
      candidate.log_likelihood = model.log_likelihood;
      candidate.parameter_count = model.parameter_count;
      candidate.bic = model.bic;
      if (!have_best || model.bic < selection.best.bic) {
        selection.best = std::move(model);
        selection.best_rank = q;
        have_best = true;
      }
    } catch (const std::exception& error) {
      candidate.error = error.what();
    }
    selection.candidates.push_back(std::move(candidate));
  }
  if (!have_best) {
    throw std::runtime_error(
        "rank selection failed: every candidate fit failed");
  }
  return selection;
}

}  // namespace mortgp
