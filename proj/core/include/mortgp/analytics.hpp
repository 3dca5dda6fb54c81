#pragma once

#include <vector>

#include <Eigen/Core>

#include "mortgp/fit.hpp"
#include "mortgp/panel.hpp"

namespace mortgp {

struct ImprovementFactor {
  Cell cell;
  double factor = 0.0;  // 1 - rate(year)/rate(year - 1)
};

// Year-over-year improvement of a log-mortality surface:
//   1 - exp(v(pop, age, year) - v(pop, age, year - 1)).
// Computed for every cell with a same-population same-age entry at the
// preceding year; any other cell except the first year of its (population,
// age) series is a gap and an error. Output in canonical cell order.
[[nodiscard]] std::vector<ImprovementFactor> improvement_factors(
    const std::vector<Cell>& cells, const Eigen::VectorXd& values);

// Implied cross-population correlations of a fitted kernel: exp(-theta)
// for the full-rank family, B_{l1 l2}/sqrt(B_{l1 l1} B_{l2 l2}) for ICM.
// The single-output family has no cross structure (std::invalid_argument).
[[nodiscard]] Eigen::MatrixXd correlation_matrix(const FittedModel& model);

// Per-population affine trend value ~ b0 + b_ag age + b_yr year.
struct TrendCoefficients {
  double intercept = 0.0;
  double age_slope = 0.0;
  double year_slope = 0.0;
};

// OLS per population over the panel's observations. Each population needs
// at least 3 observations spanning both age and year.
[[nodiscard]] std::vector<TrendCoefficients> trend_coefficients(
    const MortalityPanel& panel);

struct TrendWindow {
  double age_lo = 50.0;
  double age_hi = 84.0;
  double year_lo = 1990.0;
  double year_hi = 2012.0;
};

// Root integrated squared difference of two affine trends over the window:
//   sqrt( int int (d0 + d_ag a + d_yr t)^2 da dt ),
// evaluated in closed form from the moments of the rectangle.
[[nodiscard]] double trend_distance(const TrendCoefficients& a,
                                    const TrendCoefficients& b,
                                    const TrendWindow& window);

[[nodiscard]] Eigen::MatrixXd trend_distance_matrix(
    const std::vector<TrendCoefficients>& trends, const TrendWindow& window);

}  // namespace mortgp
