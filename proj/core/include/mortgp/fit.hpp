#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mortgp/gp.hpp"
#include "mortgp/kernels.hpp"
#include "mortgp/mean.hpp"
#include "mortgp/optim.hpp"
#include "mortgp/panel.hpp"

namespace mortgp {

// Box bounds for the optimizer, on the standardized input scale.
// Positive parameters are optimized on the log scale within these bounds.
struct ParameterBounds {
  double length_scale_min = 0.05;
  double length_scale_max = 10.0;
  double process_variance_min = 1e-8;
  double process_variance_max = 10.0;
  double noise_variance_min = 1e-8;
  double noise_variance_max = 1.0;
  double cross_theta_min = 1e-6;
  double cross_theta_max = 10.0;
  double loading_limit = 3.0;
};

struct OptimizerConfig {
  int n_starts = 10;
  std::uint64_t seed = 0;
  NelderMeadOptions nelder_mead{.max_iterations = 800,
                                .tolerance = 1e-8,
                                .initial_step = 0.25};
  ParameterBounds bounds;
  bool force_dense = false;  // disable the Kronecker fast path
};

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};
struct InverseGammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};
struct HalfNormalPrior {
  double sd = 1.0;
};

// Log-priors on standardized-scale parameters. Empty optionals are flat,
// so a default PriorSpec makes MAP coincide with MLE exactly.
struct PriorSpec {
  std::optional<NormalPrior> intercept;             // beta_0
  std::optional<NormalPrior> age_slope;             // beta_age
  std::optional<InverseGammaPrior> length_scale;    // both SE length scales
  std::optional<NormalPrior> log_process_variance;  // log eta^2
  std::optional<HalfNormalPrior> noise_variance;    // sigma_l^2
  std::optional<NormalPrior> log_cross_theta;       // log theta_{l1 l2}

  [[nodiscard]] bool flat() const {
    return !intercept && !age_slope && !length_scale &&
           !log_process_variance && !noise_variance && !log_cross_theta;
  }

  // The regularization used for the mortality fits: beta_0 ~ N(-4, 0.5),
  // beta_age ~ N(0, 0.5), theta_std ~ InvGamma(9, 12), log eta^2 ~ N(-3, 1),
  // sigma^2 ~ half-normal(0.5), log theta_cross ~ N(-1, 1).
  [[nodiscard]] static PriorSpec mortality_defaults();
};

struct StartDiagnostic {
  int index = 0;
  double objective = 0.0;  // minimized value (negative posterior/likelihood)
  int iterations = 0;
  bool converged = false;
  bool usable = false;
  std::string error;
};

struct FitDiagnostics {
  std::uint64_t seed = 0;
  int n_starts = 0;
  int best_start = -1;
  bool converged = false;
  std::vector<StartDiagnostic> starts;
  std::vector<double> best_trace;  // winning start, non-increasing
};

struct FittedModel {
  std::vector<std::string> populations;
  KernelSpec kernel;  // original (raw) input scale
  MeanModel mean;     // original scale, full coefficient vector
  Scaling scaling;
  double log_likelihood = 0.0;
  int parameter_count = 0;  // k in the BIC penalty
  double bic = 0.0;
  std::string panel_digest;
  FitDiagnostics diagnostics;
};

[[nodiscard]] double bic(double log_likelihood, int parameter_count,
                         std::size_t n_observations);

// Maximum-likelihood fit: standardizes inputs, optimizes the profiled log
// marginal likelihood by multi-start Nelder-Mead on transformed parameters,
// and back-transforms to the original scale. `rank` is the ICM Q and must
// be 0 for the other families. The unfitted `mean` carries the scenario
// (and the pinned improvement rate for kFixedYear).
[[nodiscard]] FittedModel fit_mle(const MortalityPanel& panel,
                                  KernelFamily family, int rank,
                                  const MeanModel& mean,
                                  const OptimizerConfig& config = {});

// Maximum a posteriori: adds the log-priors to the objective. The beta
// priors are evaluated at the GLS profile estimate. Flat priors reduce to
// fit_mle exactly.
[[nodiscard]] FittedModel fit_map(const MortalityPanel& panel,
                                  KernelFamily family, int rank,
                                  const MeanModel& mean,
                                  const PriorSpec& priors,
                                  const OptimizerConfig& config = {});

struct RankCandidate {
  int rank = 0;
  bool succeeded = false;
  double log_likelihood = 0.0;
  int parameter_count = 0;
  double bic = 0.0;
  std::string error;
};

struct RankSelection {
  std::vector<RankCandidate> candidates;  // ascending rank order
  int best_rank = 0;
  FittedModel best;
};

// Fits an ICM model per candidate rank and keeps the BIC minimizer.
// Candidates must satisfy 1 <= Q <= population count; individual fit
// failures are recorded, and only losing every candidate is an error.
[[nodiscard]] RankSelection select_rank(const MortalityPanel& panel,
                                        const std::vector<int>& rank_candidates,
                                        const MeanModel& mean,
                                        const OptimizerConfig& config = {},
                                        const PriorSpec& priors = {});

}  // namespace mortgp
