#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mortgp/panel.hpp"

namespace mortgp {

// Trend scenarios for the linear prior mean:
//   kFlat          (S1) intercept + age + population dummies
//   kEstimatedYear (S2) S1 plus a fitted year slope
//   kFixedYear     (S3) S1 plus a year slope pinned by the caller
enum class TrendScenario { kFlat, kEstimatedYear, kFixedYear };

[[nodiscard]] std::string to_string(TrendScenario scenario);
[[nodiscard]] TrendScenario trend_scenario_from_string(const std::string& name);

// The mean function m(x) = h(x)^T beta with basis order
// (1, age, [year], dummy_1, ..., dummy_{L-1}); population 0 is the
// baseline and has no dummy. kFixedYear keeps the year column in the
// basis with its coefficient pinned to -improvement_rate, so a positive
// rate encodes mortality declining by 1 - exp(-rate) per year.
struct MeanModel {
  TrendScenario scenario = TrendScenario::kFlat;
  double improvement_rate = 0.0;  // kFixedYear only
  Eigen::VectorXd beta;           // empty until fitted

  [[nodiscard]] bool fitted() const { return beta.size() > 0; }
  // The year slope of the mean surface (0, fitted, or pinned).
  [[nodiscard]] double year_slope() const;
};

// Full basis dimension p.
[[nodiscard]] int mean_dimension(TrendScenario scenario, int population_count);
// Coefficients estimated by GLS; excludes the pinned kFixedYear slope.
[[nodiscard]] int free_mean_parameter_count(TrendScenario scenario,
                                            int population_count);

[[nodiscard]] Eigen::VectorXd mean_basis(TrendScenario scenario,
                                         int population_count, int population,
                                         double age, double year);
[[nodiscard]] Eigen::MatrixXd mean_basis_matrix(TrendScenario scenario,
                                                int population_count,
                                                const std::vector<Cell>& cells);
[[nodiscard]] Eigen::MatrixXd mean_basis_matrix(TrendScenario scenario,
                                                int population_count,
                                                const MortalityPanel& panel);

// Column labels matching the basis order, used in rank-deficiency errors.
[[nodiscard]] std::vector<std::string> mean_term_names(
    TrendScenario scenario, const std::vector<std::string>& populations);

[[nodiscard]] double mean_value(const MeanModel& model, int population_count,
                                int population, double age, double year);

}  // namespace mortgp
