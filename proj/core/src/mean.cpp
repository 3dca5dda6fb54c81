#include "mortgp/mean.hpp"

#include <stdexcept>

namespace mortgp {

std::string to_string(TrendScenario scenario) {
  switch (scenario) {
    case TrendScenario::kFlat: return "S1";
    case TrendScenario::kEstimatedYear: return "S2";
    case TrendScenario::kFixedYear: return "S3";
  }
  throw std::logic_error("unreachable");
}

TrendScenario trend_scenario_from_string(const std::string& name) {
  if (name == "S1") return TrendScenario::kFlat;
  if (name == "S2") return TrendScenario::kEstimatedYear;
  if (name == "S3") return TrendScenario::kFixedYear;
  throw std::invalid_argument("unknown trend scenario '" + name +
                              "' (expected S1, S2, or S3)");
}

double MeanModel::year_slope() const {
  switch (scenario) {
    case TrendScenario::kFlat:
      return 0.0;
    case TrendScenario::kEstimatedYear:
      if (beta.size() < 3) {
        throw std::logic_error("mean: year slope requested before fitting");
      }
      return beta[2];
    case TrendScenario::kFixedYear:
      return -improvement_rate;
  }
  throw std::logic_error("unreachable");
}

namespace {

bool has_year_column(TrendScenario scenario) {
  return scenario != TrendScenario::kFlat;
}

void check_population(int population_count, int population) {
  if (population_count < 1) {
    throw std::invalid_argument("mean: population count must be >= 1");
  }
  if (population < 0 || population >= population_count) {
    throw std::invalid_argument("mean: population index out of range");
  }
}

}  // namespace

int mean_dimension(TrendScenario scenario, int population_count) {
  if (population_count < 1) {
    throw std::invalid_argument("mean: population count must be >= 1");
  }
  return 2 + (has_year_column(scenario) ? 1 : 0) + (population_count - 1);
}

int free_mean_parameter_count(TrendScenario scenario, int population_count) {
  const int p = mean_dimension(scenario, population_count);
  return scenario == TrendScenario::kFixedYear ? p - 1 : p;
}

Eigen::VectorXd mean_basis(TrendScenario scenario, int population_count,
                           int population, double age, double year) {
  check_population(population_count, population);
  Eigen::VectorXd h =
      Eigen::VectorXd::Zero(mean_dimension(scenario, population_count));
  h[0] = 1.0;
  h[1] = age;
  int next = 2;
  if (has_year_column(scenario)) h[next++] = year;
  if (population > 0) h[next + population - 1] = 1.0;
  return h;
}

Eigen::MatrixXd mean_basis_matrix(TrendScenario scenario, int population_count,
                                  const std::vector<Cell>& cells) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(cells.size()),
                    mean_dimension(scenario, population_count));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    h.row(static_cast<Eigen::Index>(i)) =
        mean_basis(scenario, population_count, cells[i].population,
                   cells[i].age, cells[i].year)
            .transpose();
  }
  return h;
}

Eigen::MatrixXd mean_basis_matrix(TrendScenario scenario, int population_count,
                                  const MortalityPanel& panel) {
  const auto& obs = panel.observations();
  Eigen::MatrixXd h(static_cast<Eigen::Index>(obs.size()),
                    mean_dimension(scenario, population_count));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    h.row(static_cast<Eigen::Index>(i)) =
        mean_basis(scenario, population_count, obs[i].population, obs[i].age,
                   obs[i].year)
            .transpose();
  }
  return h;
}

std::vector<std::string> mean_term_names(
    TrendScenario scenario, const std::vector<std::string>& populations) {
  std::vector<std::string> names{"intercept", "age"};
  if (has_year_column(scenario)) names.push_back("year");
  for (std::size_t l = 1; l < populations.size(); ++l) {
    names.push_back("pop:" + populations[l]);
  }
  return names;
}

double mean_value(const MeanModel& model, int population_count, int population,
                  double age, double year) {
  if (!model.fitted()) {
    throw std::logic_error("mean: coefficients not fitted");
  }
  const Eigen::VectorXd h =
      mean_basis(model.scenario, population_count, population, age, year);
  if (h.size() != model.beta.size()) {
    throw std::invalid_argument("mean: coefficient vector has dimension " +
                                std::to_string(model.beta.size()) +
                                ", basis has " + std::to_string(h.size()));
  }
  return h.dot(model.beta);
}

}  // namespace mortgp
