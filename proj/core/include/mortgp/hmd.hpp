#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mortgp/panel.hpp"

namespace mortgp {

enum class HmdColumn { kFemale, kMale, kTotal };

[[nodiscard]] HmdColumn hmd_column_from_string(const std::string& name);

enum class HmdTableKind { kMortalityRate, kDeaths, kExposure };

// One (year, age) value lifted out of an HMD-style file. Terminal open age
// groups ("110+") keep the numeric age with the flag set. Masked values
// ('.') are stored as NaN with masked set.
struct RawCell {
  int year = 0;
  int age = 0;
  bool open_age = false;
  bool masked = false;
  double value = 0.0;
};

struct RawTable {
  std::string population;
  HmdTableKind kind = HmdTableKind::kMortalityRate;
  std::vector<RawCell> cells;
};

// Parses the HMD 1x1 text layout: a preamble line naming the table kind,
// a blank line, a column header (Year Age Female Male Total), then
// whitespace-delimited rows. `column` selects the gender column.
// Throws std::runtime_error naming the line on malformed input.
[[nodiscard]] RawTable parse_hmd_table(std::istream& in,
                                       std::string population,
                                       HmdColumn column);

// log(deaths / exposure). Requires deaths > 0 and exposure > 0; throws
// std::domain_error otherwise (zero-death cells are excluded upstream,
// never imputed).
[[nodiscard]] double log_mortality(double deaths, double exposure);

struct YearRange {
  int first = 0;
  int last = 0;
};

// Requested panel window. `population_years` overrides the default range
// per population ("notched" panels with differing final years).
struct PanelRequest {
  int age_min = 0;
  int age_max = 0;
  YearRange default_years;
  std::map<std::string, YearRange> population_years;
};

struct AssemblyReport {
  std::size_t rejected_zero_death = 0;
};

// Builds a panel of log-mortality observations from per-population rate
// tables (kind kMortalityRate). Requested cells that are absent or masked
// in a source are an error listing the cells; zero-rate cells are excluded
// and counted in the report.
[[nodiscard]] MortalityPanel assemble_panel(
    const std::vector<RawTable>& rate_tables, const PanelRequest& request,
    AssemblyReport* report = nullptr);

// Same panel built from matched deaths and exposure tables (one pair per
// population, matched by population name). Exposure <= 0 on a requested
// cell is a domain error; zero-death cells are excluded and counted.
[[nodiscard]] MortalityPanel assemble_panel_from_counts(
    const std::vector<RawTable>& death_tables,
    const std::vector<RawTable>& exposure_tables, const PanelRequest& request,
    AssemblyReport* report = nullptr);

// Long-format CSV. Canonical header population,year,age,log_mx; the reader
// also accepts population,year,age,deaths,exposure and converts. Rows with
// '.' or empty values are skipped; zero-death rows are excluded.
// Population order follows first appearance.
[[nodiscard]] MortalityPanel read_panel_csv(std::istream& in);
void write_panel_csv(const MortalityPanel& panel, std::ostream& out);

}  // namespace mortgp
