#include "mortgp/panel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "text_util.hpp"

namespace mortgp {

namespace {

std::string cell_key(const std::string& population, double year, double age) {
  return population + "/" + detail::format_double(year) + "/" +
         detail::format_double(age);
}

}  // namespace

MortalityPanel::MortalityPanel(std::vector<std::string> populations,
                               std::vector<Observation> observations)
    : populations_(std::move(populations)),
      observations_(std::move(observations)) {
  if (populations_.empty()) {
    throw std::invalid_argument("panel: population list is empty");
  }
  for (std::size_t i = 0; i < populations_.size(); ++i) {
    if (populations_[i].empty()) {
      throw std::invalid_argument("panel: population name is empty");
    }
    for (std::size_t j = i + 1; j < populations_.size(); ++j) {
      if (populations_[i] == populations_[j]) {
        throw std::invalid_argument("panel: duplicate population name '" +
                                    populations_[i] + "'");
      }
    }
  }
  if (observations_.empty()) {
    throw std::invalid_argument("panel: no observations");
  }
  const int L = population_count();
  for (const Observation& o : observations_) {
    if (o.population < 0 || o.population >= L) {
      throw std::invalid_argument("panel: population index out of range");
    }
    if (!std::isfinite(o.age) || !std::isfinite(o.year) ||
        !std::isfinite(o.log_rate)) {
      throw std::invalid_argument(
          "panel: non-finite value at " +
          cell_key(populations_[o.population], o.year, o.age));
    }
  }

  std::sort(observations_.begin(), observations_.end(),
            [](const Observation& a, const Observation& b) {
              if (a.population != b.population) {
                return a.population < b.population;
              }
              if (a.year != b.year) return a.year < b.year;
              return a.age < b.age;
            });
  for (std::size_t i = 1; i < observations_.size(); ++i) {
    const Observation& a = observations_[i - 1];
    const Observation& b = observations_[i];
    if (a.population == b.population && a.year == b.year && a.age == b.age) {
      throw std::invalid_argument(
          "panel: duplicate observation at " +
          cell_key(populations_[a.population], a.year, a.age));
    }
  }

  offsets_.assign(static_cast<std::size_t>(L) + 1, 0);
  for (const Observation& o : observations_) {
    ++offsets_[static_cast<std::size_t>(o.population) + 1];
  }
  for (int l = 0; l < L; ++l) {
    if (offsets_[static_cast<std::size_t>(l) + 1] == 0) {
      throw std::invalid_argument("panel: population '" +
                                  populations_[static_cast<std::size_t>(l)] +
                                  "' has no observations");
    }
    offsets_[static_cast<std::size_t>(l) + 1] +=
        offsets_[static_cast<std::size_t>(l)];
  }

  // Grid detection. Isotropic means every population covers the full
  // product of the pooled unique ages and years; in canonical order the
  // k-th row of a population must then sit at (year[k / nA], age[k % nA]).
  std::vector<double> ages;
  std::vector<double> years;
  ages.reserve(observations_.size());
  years.reserve(observations_.size());
  for (const Observation& o : observations_) {
    ages.push_back(o.age);
    years.push_back(o.year);
  }
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());

  const std::size_t nA = ages.size();
  const std::size_t nY = years.size();
  isotropic_ = observations_.size() == nA * nY * static_cast<std::size_t>(L);
  if (isotropic_) {
    for (int l = 0; l < L && isotropic_; ++l) {
      const std::size_t off = offsets_[static_cast<std::size_t>(l)];
      const std::size_t n = offsets_[static_cast<std::size_t>(l) + 1] - off;
      if (n != nA * nY) {
        isotropic_ = false;
        break;
      }
      for (std::size_t k = 0; k < n; ++k) {
        const Observation& o = observations_[off + k];
        if (o.year != years[k / nA] || o.age != ages[k % nA]) {
          isotropic_ = false;
          break;
        }
      }
    }
  }
  if (isotropic_) {
    grid_ages_ = std::move(ages);
    grid_years_ = std::move(years);
  }
}

std::size_t MortalityPanel::population_offset(int population) const {
  if (population < 0 || population >= population_count()) {
    throw std::invalid_argument("panel: population index out of range");
  }
  return offsets_[static_cast<std::size_t>(population)];
}

std::size_t MortalityPanel::population_size(int population) const {
  if (population < 0 || population >= population_count()) {
    throw std::invalid_argument("panel: population index out of range");
  }
  return offsets_[static_cast<std::size_t>(population) + 1] -
         offsets_[static_cast<std::size_t>(population)];
}

std::pair<double, double> MortalityPanel::year_range(int population) const {
  const std::size_t off = population_offset(population);
  const std::size_t n = population_size(population);
  // Canonical order is year-major within a population.
  return {observations_[off].year, observations_[off + n - 1].year};
}

Eigen::VectorXd MortalityPanel::targets() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(observations_.size()));
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = observations_[i].log_rate;
  }
  return y;
}

std::uint64_t MortalityPanel::digest() const {
  constexpr std::uint64_t kOffset = 14695981039346656037ULL;
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  std::uint64_t h = kOffset;
  auto mix = [&h](std::string_view bytes) {
    for (const char c : bytes) {
      h ^= static_cast<std::uint8_t>(c);
      h *= kPrime;
    }
  };
  for (const Observation& o : observations_) {
    mix(populations_[static_cast<std::size_t>(o.population)]);
    mix("|");
    mix(detail::format_double(o.year));
    mix("|");
    mix(detail::format_double(o.age));
    mix("|");
    mix(detail::format_double(o.log_rate));
    mix("\n");
  }
  return h;
}

std::string MortalityPanel::digest_hex() const {
  static const char* kHex = "0123456789abcdef";
  const std::uint64_t v = digest();
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) {
    out[static_cast<std::size_t>(15 - i)] = kHex[(v >> (4 * i)) & 0xF];
  }
  return out;
}

Scaling compute_scaling(const MortalityPanel& panel) {
  const std::size_t m = panel.size();
  if (m < 2) {
    throw std::invalid_argument("scaling: need at least two observations");
  }
  double age_sum = 0.0;
  double year_sum = 0.0;
  for (const Observation& o : panel.observations()) {
    age_sum += o.age;
    year_sum += o.year;
  }
  Scaling s;
  s.age_mean = age_sum / static_cast<double>(m);
  s.year_mean = year_sum / static_cast<double>(m);
  double age_ss = 0.0;
  double year_ss = 0.0;
  for (const Observation& o : panel.observations()) {
    age_ss += (o.age - s.age_mean) * (o.age - s.age_mean);
    year_ss += (o.year - s.year_mean) * (o.year - s.year_mean);
  }
  s.age_sd = std::sqrt(age_ss / static_cast<double>(m - 1));
  s.year_sd = std::sqrt(year_ss / static_cast<double>(m - 1));
  if (!(s.age_sd > 0.0)) {
    throw std::invalid_argument("scaling: age input is constant");
  }
  if (!(s.year_sd > 0.0)) {
    throw std::invalid_argument("scaling: year input is constant");
  }
  return s;
}

namespace {

MortalityPanel map_inputs(const MortalityPanel& panel, const Scaling& s,
                          bool forward) {
  std::vector<Observation> obs = panel.observations();
  for (Observation& o : obs) {
    if (forward) {
      o.age = (o.age - s.age_mean) / s.age_sd;
      o.year = (o.year - s.year_mean) / s.year_sd;
    } else {
      o.age = o.age * s.age_sd + s.age_mean;
      o.year = o.year * s.year_sd + s.year_mean;
    }
  }
  return MortalityPanel(panel.populations(), std::move(obs));
}

}  // namespace

MortalityPanel standardize(const MortalityPanel& panel,
                           const Scaling& scaling) {
  return map_inputs(panel, scaling, true);
}

std::pair<MortalityPanel, Scaling> standardize(const MortalityPanel& panel) {
  Scaling s = compute_scaling(panel);
  return {standardize(panel, s), s};
}

MortalityPanel destandardize(const MortalityPanel& panel,
                             const Scaling& scaling) {
  return map_inputs(panel, scaling, false);
}

}  // namespace mortgp
