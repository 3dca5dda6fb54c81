#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mortgp {

// One log-mortality observation. Coordinates are doubles so standardized
// panels can share the type; raw panels carry integer-valued ages and years.
struct Observation {
  int population = 0;  // dense index into MortalityPanel::populations()
  double age = 0.0;
  double year = 0.0;
  double log_rate = 0.0;
};

// A prediction location. Population indices follow the owning panel.
struct Cell {
  int population = 0;
  double age = 0.0;
  double year = 0.0;
};

// Affine input scaling. Targets are never rescaled, inputs only.
struct Scaling {
  double age_mean = 0.0;
  double age_sd = 1.0;
  double year_mean = 0.0;
  double year_sd = 1.0;
};

// Immutable long-format mortality panel over one or more populations.
//
// Observations are held in canonical order: population-major, then year,
// then age. On an isotropic panel (every population observed on the same
// rectangular Age x Year grid) the canonical index of an observation is
//   l * n_ages * n_years + year_index * n_ages + age_index,
// the layout assumed by the Kronecker fast path.
//
// Population order is semantic: index 0 is the baseline for mean-function
// dummy coding, so constructors preserve the order given by the caller.
class MortalityPanel {
 public:
  MortalityPanel() = default;

  // Sorts into canonical order and validates. Throws std::invalid_argument
  // on empty input, unknown population indices, duplicate (population,
  // year, age) keys, non-finite values, or a population with no rows.
  MortalityPanel(std::vector<std::string> populations,
                 std::vector<Observation> observations);

  [[nodiscard]] std::size_t size() const { return observations_.size(); }
  [[nodiscard]] int population_count() const {
    return static_cast<int>(populations_.size());
  }
  [[nodiscard]] const std::vector<std::string>& populations() const {
    return populations_;
  }
  [[nodiscard]] const std::vector<Observation>& observations() const {
    return observations_;
  }

  [[nodiscard]] bool isotropic() const { return isotropic_; }

  // Common rectangular grid coordinates; empty unless isotropic.
  [[nodiscard]] const std::vector<double>& grid_ages() const {
    return grid_ages_;
  }
  [[nodiscard]] const std::vector<double>& grid_years() const {
    return grid_years_;
  }

  [[nodiscard]] std::size_t population_offset(int population) const;
  [[nodiscard]] std::size_t population_size(int population) const;
  [[nodiscard]] std::pair<double, double> year_range(int population) const;

  // Targets in canonical order.
  [[nodiscard]] Eigen::VectorXd targets() const;

  // FNV-1a hash over the canonical rows (population name, year, age,
  // log rate). Insensitive to input permutation, sensitive to any value.
  [[nodiscard]] std::uint64_t digest() const;
  [[nodiscard]] std::string digest_hex() const;

 private:
  std::vector<std::string> populations_;
  std::vector<Observation> observations_;
  std::vector<std::size_t> offsets_;  // per population, plus total at the end
  std::vector<double> grid_ages_;
  std::vector<double> grid_years_;
  bool isotropic_ = false;
};

// Pooled moments of the age and year inputs over every observation.
// Uses the sample standard deviation. Throws std::invalid_argument when
// an input dimension is constant (sd would be zero).
[[nodiscard]] Scaling compute_scaling(const MortalityPanel& panel);

// Maps inputs through (x - mean) / sd; targets untouched.
[[nodiscard]] MortalityPanel standardize(const MortalityPanel& panel,
                                         const Scaling& scaling);
// Convenience overload computing the pooled scaling itself.
[[nodiscard]] std::pair<MortalityPanel, Scaling> standardize(
    const MortalityPanel& panel);
// Inverse map; destandardize(standardize(p, s), s) reproduces p.
[[nodiscard]] MortalityPanel destandardize(const MortalityPanel& panel,
                                           const Scaling& scaling);

}  // namespace mortgp
