#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mortgp/panel.hpp"

namespace mortgp {

// SMAPE in percent: (100/M) sum_i |y_i - m_i| / ((|y_i| + |m_i|)/2).
// Symmetric in its arguments and bounded by [0, 200]. A cell with
// |y| = |m| = 0 has no defined contribution and is rejected.
[[nodiscard]] double smape_percent(const Eigen::VectorXd& actual,
                                   const Eigen::VectorXd& predicted);

// CRPS of a normal forecast N(mean, sd^2) against the realized value:
//   sd * (z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)),  z = (actual - mean)/sd.
// Equals the defining integral of (F(t) - 1{t >= actual})^2. sd must be
// strictly positive (std::domain_error).
[[nodiscard]] double crps_normal(double mean, double sd, double actual);

struct CellScore {
  Cell cell;
  double observed = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double smape_cell = 0.0;  // percent contribution of this cell
  double crps_cell = 0.0;
};

struct AgeScore {
  double age = 0.0;
  int cells = 0;
  double smape = 0.0;
  double mean_crps = 0.0;
};

struct ScoreReport {
  std::vector<CellScore> cells;
  std::vector<AgeScore> by_age;  // ascending age
  double smape = 0.0;            // percent, mean of smape_cell
  double mean_crps = 0.0;
};

// Scores a forecast against held-out observations cell by cell. Aggregates
// use pairwise summation so the totals do not depend on traversal order.
[[nodiscard]] ScoreReport score_cells(const std::vector<Cell>& cells,
                                      const Eigen::VectorXd& observed,
                                      const Eigen::VectorXd& predicted_mean,
                                      const Eigen::VectorXd& predicted_sd);

// Improvement of a score over a baseline, in percent: 100 (base - value)/base.
// The baseline must be nonzero.
[[nodiscard]] double score_improvement_percent(double baseline, double value);

// Rows population,year,age,observed,mean,sd,smape_cell,crps_cell followed
// by '#'-prefixed aggregate footer lines.
void write_score_csv(std::ostream& out, const ScoreReport& report,
                     const std::vector<std::string>& populations);

}  // namespace mortgp
