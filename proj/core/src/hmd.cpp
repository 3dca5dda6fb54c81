#include "mortgp/hmd.hpp"

#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "text_util.hpp"

namespace mortgp {

namespace {

using detail::format_double;
using detail::parse_double;
using detail::parse_int;
using detail::split;
using detail::split_ws;
using detail::trim;

[[noreturn]] void fail_line(const std::string& context, std::size_t line,
                            const std::string& message) {
  throw std::runtime_error(context + ":" + std::to_string(line) + ": " +
                           message);
}

HmdTableKind sniff_kind(std::string_view preamble, const std::string& context) {
  const std::string p(preamble);
  if (p.find("Death rates") != std::string::npos) {
    return HmdTableKind::kMortalityRate;
  }
  if (p.find("Deaths") != std::string::npos) return HmdTableKind::kDeaths;
  if (p.find("Exposure") != std::string::npos) return HmdTableKind::kExposure;
  throw std::runtime_error(context +
                           ":1: unrecognized table kind in preamble");
}

std::string cell_name(const std::string& population, int year, int age) {
  return population + "/" + std::to_string(year) + "/" + std::to_string(age);
}

}  // namespace

HmdColumn hmd_column_from_string(const std::string& name) {
  std::string lower;
  lower.reserve(name.size());
  for (char c : name) {
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "female") return HmdColumn::kFemale;
  if (lower == "male") return HmdColumn::kMale;
  if (lower == "total") return HmdColumn::kTotal;
  throw std::invalid_argument("unknown gender column '" + name +
                              "' (expected Female, Male, or Total)");
}

RawTable parse_hmd_table(std::istream& in, std::string population,
                         HmdColumn column) {
  const std::string context = population;
  RawTable table;
  table.population = std::move(population);

  std::string line;
  if (!std::getline(in, line)) fail_line(context, 1, "missing preamble line");
  table.kind = sniff_kind(line, context);
  if (!std::getline(in, line)) fail_line(context, 2, "missing blank line");
  if (!trim(line).empty()) fail_line(context, 2, "expected a blank line");
  if (!std::getline(in, line)) fail_line(context, 3, "missing column header");
  {
    const auto header = split_ws(line);
    if (header.size() < 5 || header[0] != "Year" || header[1] != "Age") {
      fail_line(context, 3, "expected header 'Year Age Female Male Total'");
    }
  }

  const std::size_t value_index = [column] {
    switch (column) {
      case HmdColumn::kFemale: return std::size_t{2};
      case HmdColumn::kMale: return std::size_t{3};
      case HmdColumn::kTotal: return std::size_t{4};
    }
    throw std::logic_error("unreachable");
  }();

  std::size_t line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() < 5) fail_line(context, line_no, "expected 5 columns");

    RawCell cell;
    if (!parse_int(tokens[0], cell.year)) {
      fail_line(context, line_no, "bad year '" + std::string(tokens[0]) + "'");
    }
    std::string_view age_token = tokens[1];
    if (!age_token.empty() && age_token.back() == '+') {
      cell.open_age = true;
      age_token.remove_suffix(1);
    }
    if (!parse_int(age_token, cell.age)) {
      fail_line(context, line_no, "bad age '" + std::string(tokens[1]) + "'");
    }
    const std::string_view value_token = tokens[value_index];
    if (value_token == ".") {
      cell.masked = true;
      cell.value = std::numeric_limits<double>::quiet_NaN();
    } else if (!parse_double(value_token, cell.value)) {
      fail_line(context, line_no,
                "bad value '" + std::string(value_token) + "'");
    }
    table.cells.push_back(cell);
  }
  return table;
}

double log_mortality(double deaths, double exposure) {
  if (!(exposure > 0.0) || !std::isfinite(exposure)) {
    throw std::domain_error("log_mortality: exposure must be positive");
  }
  if (!(deaths > 0.0) || !std::isfinite(deaths)) {
    throw std::domain_error("log_mortality: deaths must be positive");
  }
  return std::log(deaths / exposure);
}

namespace {

struct CellLookup {
  std::map<std::pair<int, int>, const RawCell*> by_year_age;

  explicit CellLookup(const RawTable& table) {
    for (const RawCell& cell : table.cells) {
      by_year_age[{cell.year, cell.age}] = &cell;
    }
  }

  [[nodiscard]] const RawCell* find(int year, int age) const {
    const auto it = by_year_age.find({year, age});
    return it == by_year_age.end() ? nullptr : it->second;
  }
};

YearRange years_for(const PanelRequest& request,
                    const std::string& population) {
  const auto it = request.population_years.find(population);
  return it == request.population_years.end() ? request.default_years
                                              : it->second;
}

void check_request(const PanelRequest& request) {
  if (request.age_max < request.age_min) {
    throw std::invalid_argument("assembly: empty age range");
  }
}

[[noreturn]] void fail_missing(const std::vector<std::string>& missing) {
  std::string msg = "assembly: " + std::to_string(missing.size()) +
                    " requested cells missing or masked:";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
  if (missing.size() > shown) msg += " ...";
  throw std::runtime_error(msg);
}

template <typename GetLogRate>
MortalityPanel assemble(const std::vector<std::string>& names,
                        const PanelRequest& request, GetLogRate&& get,
                        AssemblyReport* report) {
  check_request(request);
  std::vector<Observation> observations;
  std::vector<std::string> missing;
  AssemblyReport local;
  for (std::size_t l = 0; l < names.size(); ++l) {
    const YearRange years = years_for(request, names[l]);
    if (years.last < years.first) {
      throw std::invalid_argument("assembly: empty year range for " +
                                  names[l]);
    }
    for (int year = years.first; year <= years.last; ++year) {
      for (int age = request.age_min; age <= request.age_max; ++age) {
        bool zero_death = false;
        bool found = false;
        const double value = get(l, year, age, zero_death, found);
        if (!found) {
          missing.push_back(cell_name(names[l], year, age));
          continue;
        }
        if (zero_death) {
          ++local.rejected_zero_death;
          continue;
        }
        observations.push_back(Observation{static_cast<int>(l),
                                           static_cast<double>(age),
                                           static_cast<double>(year), value});
      }
    }
  }
  if (!missing.empty()) fail_missing(missing);
  if (observations.empty()) {
    throw std::runtime_error("assembly: no cells survive the request window");
  }
  if (report != nullptr) *report = local;
  return MortalityPanel(names, std::move(observations));
}

}  // namespace

MortalityPanel assemble_panel(const std::vector<RawTable>& rate_tables,
                              const PanelRequest& request,
                              AssemblyReport* report) {
  std::vector<std::string> names;
  std::vector<CellLookup> lookups;
  names.reserve(rate_tables.size());
  for (const RawTable& table : rate_tables) {
    if (table.kind != HmdTableKind::kMortalityRate) {
      throw std::invalid_argument("assembly: table for " + table.population +
                                  " is not a rate table");
    }
    names.push_back(table.population);
    lookups.emplace_back(table);
  }

  return assemble(
      names, request,
      [&](std::size_t l, int year, int age, bool& zero_death,
          bool& found) -> double {
        const RawCell* cell = lookups[l].find(year, age);
        if (cell == nullptr || cell->masked) return 0.0;
        found = true;
        if (cell->value < 0.0 || !std::isfinite(cell->value)) {
          throw std::runtime_error("assembly: negative rate at " +
                                   cell_name(names[l], year, age));
        }
        if (cell->value == 0.0) {
          zero_death = true;
          return 0.0;
        }
        return std::log(cell->value);
      },
      report);
}

MortalityPanel assemble_panel_from_counts(
    const std::vector<RawTable>& death_tables,
    const std::vector<RawTable>& exposure_tables, const PanelRequest& request,
    AssemblyReport* report) {
  if (death_tables.size() != exposure_tables.size()) {
    throw std::invalid_argument(
        "assembly: deaths/exposure table counts differ");
  }
  std::vector<std::string> names;
  std::vector<CellLookup> deaths;
  std::vector<CellLookup> exposures;
  for (std::size_t i = 0; i < death_tables.size(); ++i) {
    if (death_tables[i].kind != HmdTableKind::kDeaths) {
      throw std::invalid_argument("assembly: table for " +
                                  death_tables[i].population +
                                  " is not a deaths table");
    }
    if (exposure_tables[i].kind != HmdTableKind::kExposure) {
      throw std::invalid_argument("assembly: table for " +
                                  exposure_tables[i].population +
                                  " is not an exposure table");
    }
    if (death_tables[i].population != exposure_tables[i].population) {
      throw std::invalid_argument(
          "assembly: deaths/exposure population order mismatch at " +
          death_tables[i].population);
    }
    names.push_back(death_tables[i].population);
    deaths.emplace_back(death_tables[i]);
    exposures.emplace_back(exposure_tables[i]);
  }

  return assemble(
      names, request,
      [&](std::size_t l, int year, int age, bool& zero_death,
          bool& found) -> double {
        const RawCell* d = deaths[l].find(year, age);
        const RawCell* e = exposures[l].find(year, age);
        if (d == nullptr || e == nullptr || d->masked || e->masked) {
          return 0.0;
        }
        found = true;
        if (d->value == 0.0) {
          zero_death = true;
          return 0.0;
        }
        try {
          return log_mortality(d->value, e->value);
        } catch (const std::domain_error& err) {
          throw std::domain_error(std::string(err.what()) + " at " +
                                  cell_name(names[l], year, age));
        }
      },
      report);
}

namespace {

enum class CsvLayout { kLogRate, kCounts };

}  // namespace

MortalityPanel read_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("panel csv:1: empty input");
  }
  CsvLayout layout;
  {
    const auto header = split(trim(line), ',');
    std::vector<std::string> names;
    names.reserve(header.size());
    for (const auto& h : header) names.emplace_back(trim(h));
    if (names == std::vector<std::string>{"population", "year", "age",
                                          "log_mx"}) {
      layout = CsvLayout::kLogRate;
    } else if (names == std::vector<std::string>{"population", "year", "age",
                                                 "deaths", "exposure"}) {
      layout = CsvLayout::kCounts;
    } else {
      throw std::runtime_error(
          "panel csv:1: expected header population,year,age,log_mx or "
          "population,year,age,deaths,exposure");
    }
  }

  std::vector<std::string> names;
  std::vector<Observation> observations;
  auto population_index = [&names](std::string_view name) -> int {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    names.emplace_back(name);
    return static_cast<int>(names.size()) - 1;
  };

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split(row, ',');
    const std::size_t expected = layout == CsvLayout::kLogRate ? 4 : 5;
    if (fields.size() != expected) {
      throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                               ": expected " + std::to_string(expected) +
                               " fields");
    }
    const std::string_view population = trim(fields[0]);
    if (population.empty()) {
      throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                               ": empty population");
    }
    double year = 0.0;
    double age = 0.0;
    if (!parse_double(trim(fields[1]), year) ||
        !parse_double(trim(fields[2]), age)) {
      throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                               ": bad year or age");
    }

    double log_rate = 0.0;
    if (layout == CsvLayout::kLogRate) {
      const std::string_view v = trim(fields[3]);
      if (v.empty() || v == ".") continue;
      if (!parse_double(v, log_rate)) {
        throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                                 ": bad log_mx value");
      }
    } else {
      const std::string_view d = trim(fields[3]);
      const std::string_view e = trim(fields[4]);
      if (d.empty() || d == "." || e.empty() || e == ".") continue;
      double deaths = 0.0;
      double exposure = 0.0;
      if (!parse_double(d, deaths) || !parse_double(e, exposure)) {
        throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                                 ": bad deaths or exposure value");
      }
      if (deaths == 0.0) continue;  // zero-death cells are excluded
      try {
        log_rate = log_mortality(deaths, exposure);
      } catch (const std::domain_error& err) {
        throw std::runtime_error("panel csv:" + std::to_string(line_no) +
                                 ": " + err.what());
      }
    }
    observations.push_back(
        Observation{population_index(population), age, year, log_rate});
  }
  if (observations.empty()) {
    throw std::runtime_error("panel csv: no observations");
  }
  return MortalityPanel(std::move(names), std::move(observations));
}

void write_panel_csv(const MortalityPanel& panel, std::ostream& out) {
  out << "population,year,age,log_mx\n";
  for (const Observation& o : panel.observations()) {
    out << panel.populations()[static_cast<std::size_t>(o.population)] << ','
        << format_double(o.year) << ',' << format_double(o.age) << ','
        << format_double(o.log_rate) << '\n';
  }
}

}  // namespace mortgp
