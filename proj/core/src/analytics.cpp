#include "mortgp/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace mortgp {

std::vector<ImprovementFactor> improvement_factors(
    const std::vector<Cell>& cells, const Eigen::VectorXd& values) {
  if (cells.empty() ||
      values.size() != static_cast<Eigen::Index>(cells.size())) {
    throw std::invalid_argument(
        "improvement factors need one value per cell, at least one cell");
  }
  // (population, age) series, each sorted by year.
  std::map<std::pair<int, double>, std::map<double, double>> series;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& cell = cells[i];
    const auto [it, inserted] =
        series[{cell.population, cell.age}].emplace(
            cell.year, values[static_cast<Eigen::Index>(i)]);
    if (!inserted) {
      throw std::invalid_argument("duplicate cell in improvement input");
    }
  }
  std::vector<ImprovementFactor> factors;
  for (const auto& [key, by_year] : series) {
    auto it = by_year.begin();
    for (auto next = std::next(it); next != by_year.end(); ++it, ++next) {
      if (next->first != it->first + 1.0) {
        std::ostringstream message;
        message << "missing predecessor year " << next->first - 1.0
                << " for population " << key.first << " age " << key.second;
        throw std::invalid_argument(message.str());
      }
      factors.push_back(ImprovementFactor{
          Cell{key.first, key.second, next->first},
          1.0 - std::exp(next->second - it->second)});
    }
  }
  if (factors.empty()) {
    throw std::invalid_argument(
        "improvement factors need at least two consecutive years");
  }
  std::sort(factors.begin(), factors.end(),
            [](const ImprovementFactor& a, const ImprovementFactor& b) {
              if (a.cell.population != b.cell.population) {
                return a.cell.population < b.cell.population;
              }
              if (a.cell.year != b.cell.year) return a.cell.year < b.cell.year;
              return a.cell.age < b.cell.age;
            });
  return factors;
}

Eigen::MatrixXd correlation_matrix(const FittedModel& model) {
  const int populations = static_cast<int>(model.populations.size());
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(populations, populations);
  switch (model.kernel.family) {
    case KernelFamily::kSogp:
      throw std::invalid_argument(
          "single-output model has no cross-population correlations");
    case KernelFamily::kFullRank:
      for (int l1 = 0; l1 < populations; ++l1) {
        for (int l2 = l1 + 1; l2 < populations; ++l2) {
          r(l1, l2) = r(l2, l1) = model.kernel.cross.correlation(l1, l2);
        }
      }
      break;
    case KernelFamily::kIcm: {
      const Eigen::MatrixXd b =
          model.kernel.loadings * model.kernel.loadings.transpose();
      for (int l = 0; l < populations; ++l) {
        if (!(b(l, l) > 0.0)) {
          throw std::invalid_argument(
              "zero loading row: population variance vanishes");
        }
      }
      for (int l1 = 0; l1 < populations; ++l1) {
        for (int l2 = l1 + 1; l2 < populations; ++l2) {
          r(l1, l2) = r(l2, l1) =
              b(l1, l2) / std::sqrt(b(l1, l1) * b(l2, l2));
        }
      }
      break;
    }
  }
  return r;
}

std::vector<TrendCoefficients> trend_coefficients(
    const MortalityPanel& panel) {
  std::vector<TrendCoefficients> trends;
  trends.reserve(static_cast<std::size_t>(panel.population_count()));
  const Eigen::VectorXd y = panel.targets();
  for (int l = 0; l < panel.population_count(); ++l) {
    const std::size_t offset = panel.population_offset(l);
    const std::size_t count = panel.population_size(l);
    if (count < 3) {
      throw std::invalid_argument(
          "trend fit needs at least 3 observations per population");
    }
    Eigen::MatrixXd h(static_cast<Eigen::Index>(count), 3);
    for (std::size_t i = 0; i < count; ++i) {
      const Observation& obs = panel.observations()[offset + i];
      h(static_cast<Eigen::Index>(i), 0) = 1.0;
      h(static_cast<Eigen::Index>(i), 1) = obs.age;
      h(static_cast<Eigen::Index>(i), 2) = obs.year;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) {
      std::ostringstream message;
      message << "trend fit is rank deficient for population "
              << panel.populations()[static_cast<std::size_t>(l)]
              << "; observations must span both age and year";
      throw std::invalid_argument(message.str());
    }
    const Eigen::VectorXd beta =
        qr.solve(y.segment(static_cast<Eigen::Index>(offset),
                           static_cast<Eigen::Index>(count)));
    trends.push_back(TrendCoefficients{beta[0], beta[1], beta[2]});
  }
  return trends;
}

double trend_distance(const TrendCoefficients& a, const TrendCoefficients& b,
                      const TrendWindow& window) {
  if (!(window.age_hi > window.age_lo) ||
      !(window.year_hi > window.year_lo)) {
    throw std::invalid_argument("trend window bounds must be ordered");
  }
  const double d0 = a.intercept - b.intercept;
  const double da = a.age_slope - b.age_slope;
  const double dy = a.year_slope - b.year_slope;

  const auto moment1 = [](double lo, double hi) {
    return 0.5 * (hi * hi - lo * lo);
  };
  const auto moment2 = [](double lo, double hi) {
    return (hi * hi * hi - lo * lo * lo) / 3.0;
  };
  const double width_age = window.age_hi - window.age_lo;
  const double width_year = window.year_hi - window.year_lo;
  const double s1a = moment1(window.age_lo, window.age_hi);
  const double s2a = moment2(window.age_lo, window.age_hi);
  const double s1y = moment1(window.year_lo, window.year_hi);
  const double s2y = moment2(window.year_lo, window.year_hi);

  const double integral = d0 * d0 * width_age * width_year +
                          da * da * s2a * width_year +
                          dy * dy * width_age * s2y +
                          2.0 * d0 * da * s1a * width_year +
                          2.0 * d0 * dy * width_age * s1y +
                          2.0 * da * dy * s1a * s1y;
  return std::sqrt(std::max(integral, 0.0));
}

Eigen::MatrixXd trend_distance_matrix(
    const std::vector<TrendCoefficients>& trends, const TrendWindow& window) {
  const int count = static_cast<int>(trends.size());
  Eigen::MatrixXd distances = Eigen::MatrixXd::Zero(count, count);
  for (int i = 0; i < count; ++i) {
    for (int j = i + 1; j < count; ++j) {
      distances(i, j) = distances(j, i) =
          trend_distance(trends[static_cast<std::size_t>(i)],
                         trends[static_cast<std::size_t>(j)], window);
    }
  }
  return distances;
}

}  // namespace mortgp
