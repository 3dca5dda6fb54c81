#include "mortgp/scores.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace mortgp {
namespace {

// Order-independent sum; accurate enough that aggregates match any
// parallel reduction of the same cells.
double pairwise_sum(const double* values, std::size_t count) {
  if (count <= 32) {
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) total += values[i];
    return total;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

double pairwise_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values.data(), values.size()) /
         static_cast<double>(values.size());
}

double smape_term(double actual, double predicted) {
  const double denominator = 0.5 * (std::abs(actual) + std::abs(predicted));
  if (denominator == 0.0) {
    throw std::invalid_argument("smape undefined: |actual| + |predicted| = 0");
  }
  return 100.0 * std::abs(actual - predicted) / denominator;
}

double standard_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double smape_percent(const Eigen::VectorXd& actual,
                     const Eigen::VectorXd& predicted) {
  if (actual.size() == 0 || actual.size() != predicted.size()) {
    throw std::invalid_argument("smape needs equal-length nonempty inputs");
  }
  std::vector<double> terms(static_cast<std::size_t>(actual.size()));
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    try {
      terms[static_cast<std::size_t>(i)] = smape_term(actual[i], predicted[i]);
    } catch (const std::invalid_argument&) {
      std::ostringstream message;
      message << "smape undefined at index " << i
              << ": |actual| + |predicted| = 0";
      throw std::invalid_argument(message.str());
    }
  }
  return pairwise_mean(terms);
}

double crps_normal(double mean, double sd, double actual) {
  if (!(sd > 0.0)) {
    throw std::domain_error("crps requires a positive forecast sd");
  }
  const double z = (actual - mean) / sd;
  return sd * (z * (2.0 * standard_normal_cdf(z) - 1.0) +
               2.0 * standard_normal_pdf(z) -
               1.0 / std::sqrt(std::numbers::pi));
}

ScoreReport score_cells(const std::vector<Cell>& cells,
                        const Eigen::VectorXd& observed,
                        const Eigen::VectorXd& predicted_mean,
                        const Eigen::VectorXd& predicted_sd) {
  const Eigen::Index count = static_cast<Eigen::Index>(cells.size());
  if (count == 0) {
    throw std::invalid_argument("scoring needs at least one cell");
  }
  if (observed.size() != count || predicted_mean.size() != count ||
      predicted_sd.size() != count) {
    throw std::invalid_argument("scoring inputs must match the cell count");
  }

  ScoreReport report;
  report.cells.resize(cells.size());
  std::vector<double> smape_terms(cells.size());
  std::vector<double> crps_terms(cells.size());
  for (Eigen::Index i = 0; i < count; ++i) {
    const std::size_t n = static_cast<std::size_t>(i);
    CellScore& score = report.cells[n];
    score.cell = cells[n];
    score.observed = observed[i];
    score.mean = predicted_mean[i];
    score.sd = predicted_sd[i];
    try {
      score.smape_cell = smape_term(observed[i], predicted_mean[i]);
    } catch (const std::invalid_argument&) {
      std::ostringstream message;
      message << "smape undefined at population " << cells[n].population
              << " year " << cells[n].year << " age " << cells[n].age;
      throw std::invalid_argument(message.str());
    }
    score.crps_cell = crps_normal(predicted_mean[i], predicted_sd[i],
                                  observed[i]);
    smape_terms[n] = score.smape_cell;
    crps_terms[n] = score.crps_cell;
  }
  report.smape = pairwise_mean(smape_terms);
  report.mean_crps = pairwise_mean(crps_terms);

  std::map<double, std::vector<std::size_t>> ages;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    ages[cells[n].age].push_back(n);
  }
  for (const auto& [age, members] : ages) {
    std::vector<double> s(members.size());
    std::vector<double> c(members.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
      s[j] = smape_terms[members[j]];
      c[j] = crps_terms[members[j]];
    }
    report.by_age.push_back(AgeScore{age, static_cast<int>(members.size()),
                                     pairwise_mean(s), pairwise_mean(c)});
  }
  return report;
}

double score_improvement_percent(double baseline, double value) {
  if (baseline == 0.0) {
    throw std::invalid_argument("improvement undefined for a zero baseline");
  }
  return 100.0 * (baseline - value) / baseline;
}

void write_score_csv(std::ostream& out, const ScoreReport& report,
                     const std::vector<std::string>& populations) {
  using detail::format_double;
  out << "population,year,age,observed,mean,sd,smape_cell,crps_cell\n";
  for (const CellScore& score : report.cells) {
    const int pop = score.cell.population;
    if (pop < 0 || pop >= static_cast<int>(populations.size())) {
      throw std::invalid_argument("score cell references an unknown population");
    }
    out << populations[static_cast<std::size_t>(pop)] << ','
        << format_double(score.cell.year) << ','
        << format_double(score.cell.age) << ','
        << format_double(score.observed) << ',' << format_double(score.mean)
        << ',' << format_double(score.sd) << ','
        << format_double(score.smape_cell) << ','
        << format_double(score.crps_cell) << '\n';
  }
  out << "# cells," << report.cells.size() << '\n';
  out << "# smape," << format_double(report.smape) << '\n';
  out << "# mean_crps," << format_double(report.mean_crps) << '\n';
  for (const AgeScore& age : report.by_age) {
    out << "# age," << format_double(age.age) << ",cells," << age.cells
        << ",smape," << format_double(age.smape) << ",mean_crps,"
        << format_double(age.mean_crps) << '\n';
  }
}

}  // namespace mortgp
