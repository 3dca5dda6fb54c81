#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mortgp/analytics.hpp"
#include "mortgp/cluster.hpp"
#include "mortgp/fit.hpp"
#include "mortgp/gp.hpp"
#include "mortgp/hmd.hpp"
#include "mortgp/model_io.hpp"
#include "mortgp/panel.hpp"
#include "mortgp/scores.hpp"

#include "cli_util.hpp"

namespace fs = std::filesystem;

namespace mortgp::cli {
namespace {

// Mortality declining by 1% per year: log(1/0.99).
const double kDefaultImprovementRate = std::log(1.0 / 0.99);

// Contract violations in library calls are model errors; everything else
// that escapes optimization or factorization is a numeric failure.
template <typename F>
auto run_numeric(F&& run) -> decltype(run()) {
  try {
    return run();
  } catch (const CliError&) {
    throw;
  } catch (const std::invalid_argument& error) {
    throw CliError("model", error.what());
  } catch (const std::logic_error& error) {
    throw CliError("model", error.what());
  } catch (const std::exception& error) {
    throw CliError("numeric", error.what());
  }
}

struct CommonOpts {
  std::string config_path;
  CLI::Option* config_opt = nullptr;
  std::string output_dir;
  CLI::Option* output_dir_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  opts.config_opt =
      cmd->add_option("--config", opts.config_path, "JSON config file");
  opts.output_dir_opt = cmd->add_option("--output-dir", opts.output_dir,
                                        "Directory for outputs (default out)");
}

Config load_config(const CommonOpts& common) {
  if (common.config_opt->count() > 0) {
    return Config::load(common.config_path);
  }
  return Config{};
}

fs::path resolve_output_dir(const CommonOpts& common, const Config& config) {
  return fs::path(resolve<std::string>(common.output_dir_opt,
                                       common.output_dir,
                                       config.text({"output_dir"}), "out"));
}

MortalityPanel load_panel(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot open: " + path.string());
  return with_category("data", [&] { return read_panel_csv(in); });
}

FittedModel load_model_checked(const fs::path& path) {
  if (!fs::exists(path)) {
    throw CliError("io", "cannot open model file: " + path.string());
  }
  return with_category("model", [&] { return load_model(path); });
}

void check_digest(const FittedModel& model, const MortalityPanel& panel,
                  bool allow_mismatch) {
  const std::string digest = panel.digest_hex();
  if (digest == model.panel_digest) return;
  if (allow_mismatch) {
    log_debug("panel digest " + digest + " differs from model " +
              model.panel_digest);
    return;
  }
  throw CliError("model", "panel digest " + digest +
                              " does not match the model's fitted panel " +
                              model.panel_digest +
                              " (--allow-digest-mismatch to override)");
}

std::vector<int> resolve_population_indices(
    const std::vector<std::string>& requested,
    const std::vector<std::string>& available) {
  std::vector<int> indices;
  if (requested.empty()) {
    for (std::size_t l = 0; l < available.size(); ++l) {
      indices.push_back(static_cast<int>(l));
    }
    return indices;
  }
  for (const std::string& name : requested) {
    const auto it = std::find(available.begin(), available.end(), name);
    if (it == available.end()) {
      std::string known;
      for (const std::string& have : available) {
        if (!known.empty()) known += ", ";
        known += have;
      }
      throw CliError("data",
                     "unknown population '" + name + "' (panel has: " + known +
                         ")");
    }
    indices.push_back(static_cast<int>(it - available.begin()));
  }
  return indices;
}

// Canonical cell order: population-major, then year, then age.
std::vector<Cell> grid_cells(const std::vector<int>& populations,
                             std::pair<int, int> ages,
                             std::pair<int, int> years) {
  std::vector<Cell> cells;
  for (int pop : populations) {
    for (int year = years.first; year <= years.second; ++year) {
      for (int age = ages.first; age <= ages.second; ++age) {
        cells.push_back(Cell{pop, static_cast<double>(age),
                             static_cast<double>(year)});
      }
    }
  }
  return cells;
}

std::string cell_label(const std::vector<std::string>& populations,
                       const Cell& cell) {
  return populations[static_cast<std::size_t>(cell.population)] + ":" +
         format_double(cell.age) + ":" + format_double(cell.year);
}

std::string matrix_csv(const Eigen::MatrixXd& matrix,
                       const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "population";
  for (const std::string& label : labels) out << ',' << label;
  out << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      out << ',' << format_double(matrix(i, j));
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- ingest

struct RateSource {
  std::string population;
  std::string path;
  std::string column = "total";
};

struct CountSource {
  std::string population;
  std::string deaths;
  std::string exposures;
  std::string column = "total";
};

struct IngestOpts {
  CommonOpts common;
  std::vector<std::string> sources;
  CLI::Option* sources_opt = nullptr;
  std::vector<std::string> deaths;
  CLI::Option* deaths_opt = nullptr;
  std::vector<std::string> exposures;
  CLI::Option* exposures_opt = nullptr;
  std::string column = "total";
  CLI::Option* column_opt = nullptr;
  std::string ages;
  CLI::Option* ages_opt = nullptr;
  std::string years;
  CLI::Option* years_opt = nullptr;
  std::vector<std::string> notches;
  CLI::Option* notches_opt = nullptr;
  std::string output;
  CLI::Option* output_opt = nullptr;
};

RawTable load_hmd_file(const fs::path& path, const std::string& population,
                       HmdColumn column, HmdTableKind expected,
                       const char* expected_name) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot open: " + path.string());
  RawTable table = with_category("data", [&] {
    return parse_hmd_table(in, population, column);
  });
  if (table.kind != expected) {
    throw CliError("data",
                   path.string() + ": expected " + expected_name + " table");
  }
  return table;
}

void run_ingest(const IngestOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);

  const std::string default_column = resolve<std::string>(
      opts.column_opt, opts.column, config.text({"data", "column"}), "total");

  std::vector<RateSource> rates;
  std::vector<CountSource> counts;
  if (opts.sources_opt->count() > 0) {
    for (const std::string& entry : opts.sources) {
      const auto [population, path] = parse_assignment(entry);
      rates.push_back(RateSource{population, path, default_column});
    }
  } else if (const nlohmann::json* node = config.node({"data", "sources"})) {
    if (!node->is_array()) {
      throw CliError("config", "'data.sources' must be an array");
    }
    for (const nlohmann::json& entry : *node) {
      if (!entry.is_object() || !entry.contains("population") ||
          !entry.contains("path")) {
        throw CliError("config",
                       "'data.sources' entries need population and path");
      }
      rates.push_back(RateSource{
          entry["population"].get<std::string>(),
          entry["path"].get<std::string>(),
          entry.value("column", default_column)});
    }
  }
  if (opts.deaths_opt->count() > 0 || opts.exposures_opt->count() > 0) {
    if (opts.deaths.size() != opts.exposures.size()) {
      throw CliError("usage",
                     "--deaths and --exposures must pair per population");
    }
    std::map<std::string, std::string> by_pop;
    for (const std::string& entry : opts.exposures) {
      const auto [population, path] = parse_assignment(entry);
      by_pop[population] = path;
    }
    for (const std::string& entry : opts.deaths) {
      const auto [population, path] = parse_assignment(entry);
      const auto it = by_pop.find(population);
      if (it == by_pop.end()) {
        throw CliError("usage",
                       "no --exposures entry for population " + population);
      }
      counts.push_back(CountSource{population, path, it->second,
                                   default_column});
    }
  } else if (const nlohmann::json* node = config.node({"data", "counts"})) {
    if (!node->is_array()) {
      throw CliError("config", "'data.counts' must be an array");
    }
    for (const nlohmann::json& entry : *node) {
      if (!entry.is_object() || !entry.contains("population") ||
          !entry.contains("deaths") || !entry.contains("exposures")) {
        throw CliError(
            "config",
            "'data.counts' entries need population, deaths, exposures");
      }
      counts.push_back(CountSource{
          entry["population"].get<std::string>(),
          entry["deaths"].get<std::string>(),
          entry["exposures"].get<std::string>(),
          entry.value("column", default_column)});
    }
  }
  if (rates.empty() && counts.empty()) {
    throw CliError("usage", "no data sources given (--source or --deaths)");
  }
  if (!rates.empty() && !counts.empty()) {
    throw CliError("usage", "rate and count sources cannot be mixed");
  }

  const std::pair<int, int> ages = opts.ages_opt->count() > 0
                                       ? parse_int_range(opts.ages)
                                       : resolve_required<std::pair<int, int>>(
                                             nullptr, {},
                                             config.int_pair(
                                                 {"data", "age_range"}),
                                             "age range (--ages)");
  const std::pair<int, int> years =
      opts.years_opt->count() > 0
          ? parse_int_range(opts.years)
          : resolve_required<std::pair<int, int>>(
                nullptr, {}, config.int_pair({"data", "year_range"}),
                "year range (--years)");

  PanelRequest request;
  request.age_min = ages.first;
  request.age_max = ages.second;
  request.default_years = YearRange{years.first, years.second};
  if (opts.notches_opt->count() > 0) {
    for (const std::string& entry : opts.notches) {
      const auto [population, range] = parse_assignment(entry);
      const auto [lo, hi] = parse_int_range(range);
      request.population_years[population] = YearRange{lo, hi};
    }
  } else if (const nlohmann::json* node =
                 config.node({"data", "population_years"})) {
    if (!node->is_object()) {
      throw CliError("config", "'data.population_years' must be an object");
    }
    for (const auto& item : node->items()) {
      const nlohmann::json& value = item.value();
      if (!value.is_array() || value.size() != 2) {
        throw CliError("config",
                       "'data.population_years' values must be [lo, hi]");
      }
      request.population_years[item.key()] =
          YearRange{value[0].get<int>(), value[1].get<int>()};
    }
  }

  const HmdColumn column_of = [&](const std::string& name) {
    return with_category("usage",
                         [&] { return hmd_column_from_string(name); });
  }(default_column);
  AssemblyReport report;
  MortalityPanel panel;
  nlohmann::ordered_json source_settings = nlohmann::ordered_json::array();
  if (!rates.empty()) {
    std::vector<RawTable> tables;
    for (const RateSource& source : rates) {
      const HmdColumn column = with_category("usage", [&] {
        return hmd_column_from_string(source.column);
      });
      tables.push_back(load_hmd_file(source.path, source.population, column,
                                     HmdTableKind::kMortalityRate,
                                     "a death-rate"));
      source_settings.push_back({{"population", source.population},
                                 {"path", source.path},
                                 {"column", source.column}});
    }
    panel = with_category(
        "data", [&] { return assemble_panel(tables, request, &report); });
  } else {
    std::vector<RawTable> death_tables;
    std::vector<RawTable> exposure_tables;
    for (const CountSource& source : counts) {
      const HmdColumn column = with_category("usage", [&] {
        return hmd_column_from_string(source.column);
      });
      death_tables.push_back(load_hmd_file(source.deaths, source.population,
                                           column, HmdTableKind::kDeaths,
                                           "a deaths"));
      exposure_tables.push_back(
          load_hmd_file(source.exposures, source.population, column,
                        HmdTableKind::kExposure, "an exposure"));
      source_settings.push_back({{"population", source.population},
                                 {"deaths", source.deaths},
                                 {"exposures", source.exposures},
                                 {"column", source.column}});
    }
    panel = with_category("data", [&] {
      return assemble_panel_from_counts(death_tables, exposure_tables,
                                        request, &report);
    });
  }

  ensure_directory(output_dir);
  const fs::path output =
      opts.output_opt->count() > 0
          ? fs::path(opts.output)
          : fs::path(resolve<std::string>(
                nullptr, {}, config.text({"data", "panel_csv"}),
                (output_dir / "panel.csv").string()));
  {
    std::ostringstream csv;
    write_panel_csv(panel, csv);
    write_text_file(output, csv.str());
  }

  nlohmann::ordered_json settings;
  settings["sources"] = std::move(source_settings);
  settings["column"] = default_column;
  settings["ages"] = {ages.first, ages.second};
  settings["years"] = {years.first, years.second};
  if (!request.population_years.empty()) {
    nlohmann::ordered_json notches;
    for (const auto& [population, range] : request.population_years) {
      notches[population] = {range.first, range.last};
    }
    settings["population_years"] = std::move(notches);
  }
  settings["output"] = output.string();
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = panel.digest_hex();
  write_manifest(output_dir, "ingest", settings, inputs);

  std::cout << "populations=" << panel.population_count()
            << " observations=" << panel.size() << " isotropic="
            << (panel.isotropic() ? "true" : "false") << '\n';
  if (!panel.isotropic() || !request.population_years.empty()) {
    for (int l = 0; l < panel.population_count(); ++l) {
      const auto [first, last] = panel.year_range(l);
      std::cout << "years "
                << panel.populations()[static_cast<std::size_t>(l)] << '='
                << format_double(first) << ':' << format_double(last) << '\n';
    }
  }
  if (report.rejected_zero_death > 0) {
    std::cout << "rejected_zero_death=" << report.rejected_zero_death << '\n';
  }
  std::cout << "panel written to " << output.string() << '\n';
}

// ------------------------------------------------------------------- fit

struct FitOpts {
  CommonOpts common;
  std::string panel;
  CLI::Option* panel_opt = nullptr;
  std::string family;
  CLI::Option* family_opt = nullptr;
  int rank = 0;
  CLI::Option* rank_opt = nullptr;
  std::string ranks;
  CLI::Option* ranks_opt = nullptr;
  std::string scenario;
  CLI::Option* scenario_opt = nullptr;
  double improvement_rate = 0.0;
  CLI::Option* rate_opt = nullptr;
  bool map_mode = false;
  CLI::Option* map_opt = nullptr;
  int n_starts = 0;
  CLI::Option* starts_opt = nullptr;
  int max_iterations = 0;
  CLI::Option* iterations_opt = nullptr;
  double tolerance = 0.0;
  CLI::Option* tolerance_opt = nullptr;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool force_dense = false;
  CLI::Option* dense_opt = nullptr;
};

void add_fit_options(CLI::App* cmd, FitOpts& opts) {
  opts.panel_opt = cmd->add_option("--panel", opts.panel, "Panel CSV");
  opts.family_opt = cmd->add_option("--family", opts.family,
                                    "Kernel family: sogp|full_rank|icm");
  opts.rank_opt =
      cmd->add_option("--rank", opts.rank, "Coregionalization rank (icm)");
  opts.ranks_opt = cmd->add_option(
      "--ranks", opts.ranks, "Comma-separated rank candidates (icm scan)");
  opts.scenario_opt = cmd->add_option("--scenario", opts.scenario,
                                      "Trend scenario: S1|S2|S3");
  opts.rate_opt = cmd->add_option(
      "--improvement-rate", opts.improvement_rate,
      "Pinned yearly improvement rate for S3 (default log(1/0.99))");
  opts.map_opt =
      cmd->add_flag("--map", opts.map_mode, "Regularize with the built-in priors");
  opts.starts_opt =
      cmd->add_option("--starts", opts.n_starts, "Optimizer starts");
  opts.iterations_opt = cmd->add_option("--max-iters", opts.max_iterations,
                                        "Simplex iterations per start");
  opts.tolerance_opt =
      cmd->add_option("--tolerance", opts.tolerance, "Objective tolerance");
  opts.seed_opt = cmd->add_option("--seed", opts.seed, "Random seed");
  opts.dense_opt = cmd->add_flag("--force-dense", opts.force_dense,
                                 "Disable the Kronecker fast path");
}

struct ResolvedFit {
  fs::path panel_path;
  KernelFamily family = KernelFamily::kSogp;
  std::vector<int> ranks;  // icm candidates; empty otherwise
  MeanModel mean;
  bool map_mode = false;
  OptimizerConfig optimizer;
  std::string scenario_name;
  std::string family_name;
};

ResolvedFit resolve_fit(const FitOpts& opts, const Config& config) {
  ResolvedFit fit;
  fit.panel_path = resolve_required<std::string>(
      opts.panel_opt, opts.panel, config.text({"data", "panel_csv"}),
      "panel CSV (--panel)");
  fit.family_name = resolve_required<std::string>(
      opts.family_opt, opts.family, config.text({"model", "family"}),
      "kernel family (--family)");
  fit.family = with_category(
      "usage", [&] { return kernel_family_from_string(fit.family_name); });

  fit.scenario_name = resolve<std::string>(
      opts.scenario_opt, opts.scenario, config.text({"model", "scenario"}),
      "S1");
  fit.mean.scenario = with_category("usage", [&] {
    return trend_scenario_from_string(fit.scenario_name);
  });
  if (fit.mean.scenario == TrendScenario::kFixedYear) {
    fit.mean.improvement_rate = resolve<double>(
        opts.rate_opt, opts.improvement_rate,
        config.number({"model", "improvement_rate"}), kDefaultImprovementRate);
  } else if (opts.rate_opt->count() > 0) {
    throw CliError("usage", "--improvement-rate applies to scenario S3 only");
  }

  if (fit.family == KernelFamily::kIcm) {
    if (opts.ranks_opt->count() > 0) {
      fit.ranks = parse_int_list(opts.ranks);
    } else if (opts.rank_opt->count() > 0) {
      fit.ranks = {opts.rank};
    } else if (const auto list = config.int_list({"model", "ranks"})) {
      fit.ranks = *list;
    } else if (const auto single = config.integer({"model", "rank"})) {
      fit.ranks = {*single};
    } else {
      throw CliError("usage", "icm needs --rank or --ranks");
    }
  } else if (opts.rank_opt->count() > 0 || opts.ranks_opt->count() > 0) {
    throw CliError("usage", "--rank/--ranks apply to the icm family only");
  }

  fit.map_mode = opts.map_opt->count() > 0
                     ? true
                     : config.boolean({"model", "map"}).value_or(false);

  fit.optimizer.n_starts = resolve<int>(
      opts.starts_opt, opts.n_starts,
      config.integer({"optimizer", "n_starts"}), 10);
  fit.optimizer.nelder_mead.max_iterations =
      resolve<int>(opts.iterations_opt, opts.max_iterations,
                   config.integer({"optimizer", "max_iterations"}), 800);
  fit.optimizer.nelder_mead.tolerance =
      resolve<double>(opts.tolerance_opt, opts.tolerance,
                      config.number({"optimizer", "tolerance"}), 1e-8);
  fit.optimizer.force_dense =
      opts.dense_opt->count() > 0
          ? true
          : config.boolean({"optimizer", "force_dense"}).value_or(false);
  const std::optional<int> config_seed = config.integer({"seed"});
  fit.optimizer.seed = opts.seed_opt->count() > 0
                           ? opts.seed
                           : (config_seed ? static_cast<std::uint64_t>(
                                                *config_seed)
                                          : 0);
  return fit;
}

nlohmann::ordered_json fit_settings_json(const ResolvedFit& fit) {
  nlohmann::ordered_json settings;
  settings["panel"] = fit.panel_path.string();
  settings["family"] = fit.family_name;
  if (!fit.ranks.empty()) settings["ranks"] = fit.ranks;
  settings["scenario"] = fit.scenario_name;
  if (fit.mean.scenario == TrendScenario::kFixedYear) {
    settings["improvement_rate"] = fit.mean.improvement_rate;
  }
  settings["map"] = fit.map_mode;
  settings["optimizer"] = {
      {"n_starts", fit.optimizer.n_starts},
      {"max_iterations", fit.optimizer.nelder_mead.max_iterations},
      {"tolerance", fit.optimizer.nelder_mead.tolerance},
      {"force_dense", fit.optimizer.force_dense},
      {"seed", fit.optimizer.seed}};
  return settings;
}

void append_diagnostics(std::ostringstream& log,
                        const FitDiagnostics& diagnostics) {
  for (const StartDiagnostic& start : diagnostics.starts) {
    if (!start.error.empty()) {
      log << "start " << start.index << ": failed: " << start.error << '\n';
    } else {
      log << "start " << start.index
          << ": objective=" << format_double(start.objective)
          << " iterations=" << start.iterations
          << " converged=" << (start.converged ? "true" : "false") << '\n';
    }
  }
  log << "best start " << diagnostics.best_start << '\n';
}

std::string bic_scan_csv(const RankSelection& selection) {
  std::ostringstream out;
  out << "Q,loglik,k,bic,selected\n";
  for (const RankCandidate& candidate : selection.candidates) {
    if (candidate.succeeded) {
      out << candidate.rank << ',' << format_double(candidate.log_likelihood)
          << ',' << candidate.parameter_count << ','
          << format_double(candidate.bic) << ','
          << (candidate.rank == selection.best_rank ? 1 : 0) << '\n';
    } else {
      out << candidate.rank << ",,,,0\n";
    }
  }
  for (const RankCandidate& candidate : selection.candidates) {
    if (!candidate.succeeded) {
      out << "# rank " << candidate.rank << " failed: " << candidate.error
          << '\n';
    }
  }
  return out.str();
}

void run_fit(const FitOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const ResolvedFit fit = resolve_fit(opts, config);
  const MortalityPanel panel = load_panel(fit.panel_path);
  const PriorSpec priors =
      fit.map_mode ? PriorSpec::mortality_defaults() : PriorSpec{};

  std::ostringstream log;
  log << "fit family=" << fit.family_name << " scenario=" << fit.scenario_name
      << " mode=" << (fit.map_mode ? "map" : "mle")
      << " seed=" << fit.optimizer.seed
      << " starts=" << fit.optimizer.n_starts << '\n';

  FittedModel model;
  std::optional<RankSelection> selection;
  if (fit.family == KernelFamily::kIcm) {
    selection = run_numeric([&] {
      return select_rank(panel, fit.ranks, fit.mean, fit.optimizer, priors);
    });
    model = selection->best;
    log << "candidates:\n";
    for (const RankCandidate& candidate : selection->candidates) {
      if (candidate.succeeded) {
        log << "rank " << candidate.rank
            << ": loglik=" << format_double(candidate.log_likelihood)
            << " k=" << candidate.parameter_count
            << " bic=" << format_double(candidate.bic)
            << (candidate.rank == selection->best_rank ? " (selected)" : "")
            << '\n';
      } else {
        log << "rank " << candidate.rank << ": failed: " << candidate.error
            << '\n';
      }
    }
    log << "winner rank " << selection->best_rank << " diagnostics:\n";
  } else {
    model = run_numeric([&] {
      return fit_map(panel, fit.family, 0, fit.mean, priors, fit.optimizer);
    });
  }
  append_diagnostics(log, model.diagnostics);
  log << "loglik=" << format_double(model.log_likelihood)
      << " k=" << model.parameter_count << " bic=" << format_double(model.bic)
      << '\n';

  ensure_directory(output_dir);
  const fs::path model_path = output_dir / "model.json";
  with_category("io", [&] { save_model(model, model_path); return 0; });
  write_text_file(output_dir / "fit_log.txt", log.str());
  if (selection) {
    write_text_file(output_dir / "bic_scan.csv", bic_scan_csv(*selection));
  }
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = model.panel_digest;
  write_manifest(output_dir, "fit", fit_settings_json(fit), inputs);

  std::cout << "family=" << fit.family_name;
  if (fit.family == KernelFamily::kIcm) {
    std::cout << " rank=" << model.kernel.rank();
  }
  std::cout << " scenario=" << fit.scenario_name
            << " loglik=" << format_double(model.log_likelihood)
            << " k=" << model.parameter_count
            << " bic=" << format_double(model.bic) << '\n';
  if (selection && selection->candidates.size() > 1) {
    std::cout << "selected rank " << selection->best_rank << '\n';
  }
  std::cout << "model written to " << model_path.string() << '\n';
}

// -------------------------------------------------------------- bic-scan

void run_bic_scan(const FitOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  ResolvedFit fit = resolve_fit(opts, config);
  if (fit.family != KernelFamily::kIcm) {
    throw CliError("usage", "bic-scan applies to the icm family");
  }
  const MortalityPanel panel = load_panel(fit.panel_path);
  const PriorSpec priors =
      fit.map_mode ? PriorSpec::mortality_defaults() : PriorSpec{};
  const RankSelection selection = run_numeric([&] {
    return select_rank(panel, fit.ranks, fit.mean, fit.optimizer, priors);
  });

  ensure_directory(output_dir);
  const fs::path scan_path = output_dir / "bic_scan.csv";
  write_text_file(scan_path, bic_scan_csv(selection));
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = panel.digest_hex();
  write_manifest(output_dir, "bic-scan", fit_settings_json(fit), inputs);

  for (const RankCandidate& candidate : selection.candidates) {
    if (candidate.succeeded) {
      std::cout << "rank " << candidate.rank
                << ": loglik=" << format_double(candidate.log_likelihood)
                << " k=" << candidate.parameter_count
                << " bic=" << format_double(candidate.bic) << '\n';
    } else {
      std::cout << "rank " << candidate.rank << ": failed\n";
    }
  }
  std::cout << "selected rank " << selection.best_rank << '\n';
  std::cout << "scan written to " << scan_path.string() << '\n';
}

// --------------------------------------------------------------- predict

struct PredictOpts {
  CommonOpts common;
  std::string model;
  CLI::Option* model_opt = nullptr;
  std::string panel;
  CLI::Option* panel_opt = nullptr;
  std::vector<std::string> populations;
  CLI::Option* populations_opt = nullptr;
  std::string ages;
  CLI::Option* ages_opt = nullptr;
  std::string years;
  CLI::Option* years_opt = nullptr;
  bool joint = false;
  CLI::Option* joint_opt = nullptr;
  int samples = 0;
  CLI::Option* samples_opt = nullptr;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool allow_mismatch = false;
  CLI::Option* mismatch_opt = nullptr;
  std::string output;
  CLI::Option* output_opt = nullptr;
};

struct PredictionSetup {
  FittedModel model;
  MortalityPanel panel;
  std::vector<Cell> cells;
  std::pair<int, int> ages;
  std::pair<int, int> years;
  std::vector<std::string> requested_populations;
};

PredictionSetup prepare_prediction(const PredictOpts& opts,
                                   const Config& config) {
  PredictionSetup setup;
  const std::string model_path = resolve_required<std::string>(
      opts.model_opt, opts.model, config.text({"predict", "model"}),
      "model JSON (--model)");
  const std::string panel_path = resolve_required<std::string>(
      opts.panel_opt, opts.panel, config.text({"data", "panel_csv"}),
      "panel CSV (--panel)");
  setup.model = load_model_checked(model_path);
  setup.panel = load_panel(panel_path);
  if (setup.panel.populations() != setup.model.populations) {
    throw CliError("model",
                   "panel populations do not match the model's populations");
  }
  check_digest(setup.model, setup.panel,
               opts.mismatch_opt->count() > 0 && opts.allow_mismatch);

  setup.ages = opts.ages_opt->count() > 0
                   ? parse_int_range(opts.ages)
                   : resolve_required<std::pair<int, int>>(
                         nullptr, {}, config.int_pair({"predict", "ages"}),
                         "age range (--ages)");
  setup.years = opts.years_opt->count() > 0
                    ? parse_int_range(opts.years)
                    : resolve_required<std::pair<int, int>>(
                          nullptr, {}, config.int_pair({"predict", "years"}),
                          "year range (--years)");
  setup.requested_populations = resolve<std::vector<std::string>>(
      opts.populations_opt, opts.populations,
      config.text_list({"predict", "populations"}), {});
  const std::vector<int> indices = resolve_population_indices(
      setup.requested_populations, setup.model.populations);
  setup.cells = grid_cells(indices, setup.ages, setup.years);
  return setup;
}

std::string predictions_csv(const PredictionSummary& summary,
                            const std::vector<std::string>& populations) {
  std::ostringstream out;
  out << "population,age,year,mean,sd_f,sd_y,lo95,hi95\n";
  for (std::size_t i = 0; i < summary.cells.size(); ++i) {
    const Cell& cell = summary.cells[i];
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    const double mean = summary.mean[row];
    const double sd_y = summary.sd_observed[row];
    out << populations[static_cast<std::size_t>(cell.population)] << ','
        << format_double(cell.age) << ',' << format_double(cell.year) << ','
        << format_double(mean) << ',' << format_double(summary.sd_latent[row])
        << ',' << format_double(sd_y) << ','
        << format_double(mean - 1.96 * sd_y) << ','
        << format_double(mean + 1.96 * sd_y) << '\n';
  }
  return out.str();
}

void run_predict(const PredictOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const PredictionSetup setup = prepare_prediction(opts, config);

  const bool joint =
      opts.joint_opt->count() > 0
          ? true
          : config.boolean({"predict", "joint"}).value_or(false);
  const int samples = resolve<int>(opts.samples_opt, opts.samples,
                                   config.integer({"predict", "samples"}), 0);
  if (samples < 0) throw CliError("usage", "--samples must be nonnegative");
  const std::optional<int> config_seed = config.integer({"seed"});
  const std::uint64_t seed =
      opts.seed_opt->count() > 0
          ? opts.seed
          : (config_seed ? static_cast<std::uint64_t>(*config_seed) : 0);

  MeanModel mean;
  mean.scenario = setup.model.mean.scenario;
  mean.improvement_rate = setup.model.mean.improvement_rate;
  const Posterior posterior = run_numeric([&] {
    return Posterior(setup.panel, setup.model.kernel, mean);
  });
  const bool want_joint = joint || samples > 0;
  const PredictionSummary summary = run_numeric([&] {
    return posterior.predict(setup.cells, want_joint);
  });

  ensure_directory(output_dir);
  const fs::path output = opts.output_opt->count() > 0
                              ? fs::path(opts.output)
                              : output_dir / "predictions.csv";
  write_text_file(output,
                  predictions_csv(summary, setup.model.populations));

  if (joint) {
    std::ostringstream out;
    out << "cell";
    for (const Cell& cell : summary.cells) {
      out << ',' << cell_label(setup.model.populations, cell);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < summary.joint_latent.rows(); ++i) {
      out << cell_label(setup.model.populations,
                        summary.cells[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < summary.joint_latent.cols(); ++j) {
        out << ',' << format_double(summary.joint_latent(i, j));
      }
      out << '\n';
    }
    write_text_file(output_dir / "joint.csv", out.str());
  }
  if (samples > 0) {
    const Eigen::MatrixXd paths = run_numeric([&] {
      return sample_posterior(summary, samples, seed);
    });
    std::ostringstream out;
    out << "path,population,age,year,value\n";
    for (Eigen::Index p = 0; p < paths.rows(); ++p) {
      for (std::size_t i = 0; i < summary.cells.size(); ++i) {
        const Cell& cell = summary.cells[i];
        out << p << ','
            << setup.model.populations[static_cast<std::size_t>(
                   cell.population)]
            << ',' << format_double(cell.age) << ','
            << format_double(cell.year) << ','
            << format_double(paths(p, static_cast<Eigen::Index>(i))) << '\n';
      }
    }
    write_text_file(output_dir / "samples.csv", out.str());
  }

  nlohmann::ordered_json settings;
  settings["model"] = resolve<std::string>(
      opts.model_opt, opts.model, config.text({"predict", "model"}), "");
  settings["panel"] = resolve<std::string>(
      opts.panel_opt, opts.panel, config.text({"data", "panel_csv"}), "");
  settings["ages"] = {setup.ages.first, setup.ages.second};
  settings["years"] = {setup.years.first, setup.years.second};
  if (!setup.requested_populations.empty()) {
    settings["populations"] = setup.requested_populations;
  }
  settings["joint"] = joint;
  settings["samples"] = samples;
  if (samples > 0) settings["seed"] = seed;
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = setup.panel.digest_hex();
  inputs["model_digest"] = setup.model.panel_digest;
  write_manifest(output_dir, "predict", settings, inputs);

  std::cout << "cells=" << summary.cells.size() << " written to "
            << output.string() << '\n';
  if (samples > 0) {
    std::cout << "samples written to " << (output_dir / "samples.csv").string()
              << '\n';
  }
}

// ----------------------------------------------------------------- score

struct ScoreOpts {
  CommonOpts common;
  std::string model;
  CLI::Option* model_opt = nullptr;
  std::string panel;
  CLI::Option* panel_opt = nullptr;
  std::string holdout;
  CLI::Option* holdout_opt = nullptr;
  std::string baseline;
  CLI::Option* baseline_opt = nullptr;
  bool allow_mismatch = false;
  CLI::Option* mismatch_opt = nullptr;
  std::string output;
  CLI::Option* output_opt = nullptr;
};

std::optional<double> csv_footer_value(const std::string& text,
                                       const std::string& key) {
  std::istringstream in(text);
  std::string line;
  const std::string prefix = "# " + key + ",";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) {
      try {
        return std::stod(line.substr(prefix.size()));
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

void run_score(const ScoreOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const std::string model_path = resolve_required<std::string>(
      opts.model_opt, opts.model, config.text({"predict", "model"}),
      "model JSON (--model)");
  const std::string panel_path = resolve_required<std::string>(
      opts.panel_opt, opts.panel, config.text({"data", "panel_csv"}),
      "training panel CSV (--panel)");
  const std::string holdout_path = resolve_required<std::string>(
      opts.holdout_opt, opts.holdout, config.text({"score", "holdout_csv"}),
      "holdout panel CSV (--holdout)");

  const FittedModel model = load_model_checked(model_path);
  const MortalityPanel panel = load_panel(panel_path);
  if (panel.populations() != model.populations) {
    throw CliError("model",
                   "panel populations do not match the model's populations");
  }
  check_digest(model, panel, opts.mismatch_opt->count() > 0 &&
                                 opts.allow_mismatch);
  const MortalityPanel holdout = load_panel(holdout_path);

  // Holdout populations join the model by name.
  std::vector<int> index_map;
  std::vector<std::string> missing;
  for (const std::string& name : holdout.populations()) {
    const auto it = std::find(model.populations.begin(),
                              model.populations.end(), name);
    if (it == model.populations.end()) {
      missing.push_back(name);
    } else {
      index_map.push_back(static_cast<int>(it - model.populations.begin()));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& name : missing) {
      if (!list.empty()) list += ", ";
      list += name;
    }
    throw CliError("data", "holdout populations missing from model: " + list);
  }

  std::vector<Cell> cells;
  cells.reserve(holdout.size());
  for (const Observation& obs : holdout.observations()) {
    cells.push_back(Cell{index_map[static_cast<std::size_t>(obs.population)],
                         obs.age, obs.year});
  }
  MeanModel mean;
  mean.scenario = model.mean.scenario;
  mean.improvement_rate = model.mean.improvement_rate;
  const Posterior posterior = run_numeric([&] {
    return Posterior(panel, model.kernel, mean);
  });
  const PredictionSummary summary =
      run_numeric([&] { return posterior.predict(cells); });
  const ScoreReport report = with_category("data", [&] {
    return score_cells(cells, holdout.targets(), summary.mean,
                       summary.sd_observed);
  });

  std::ostringstream csv;
  write_score_csv(csv, report, model.populations);

  std::optional<double> baseline_smape;
  std::optional<double> baseline_crps;
  const bool have_baseline = opts.baseline_opt->count() > 0 ||
                             config.text({"score", "baseline_csv"});
  if (have_baseline) {
    const std::string baseline_path = resolve_required<std::string>(
        opts.baseline_opt, opts.baseline,
        config.text({"score", "baseline_csv"}), "baseline CSV");
    const std::string text = read_text_file(baseline_path);
    baseline_smape = csv_footer_value(text, "smape");
    baseline_crps = csv_footer_value(text, "mean_crps");
    if (!baseline_smape) {
      throw CliError("data",
                     "baseline CSV lacks a '# smape,' footer: " +
                         baseline_path);
    }
    csv << "# baseline_smape," << format_double(*baseline_smape) << '\n';
    csv << "# smape_improvement_percent,"
        << format_double(
               score_improvement_percent(*baseline_smape, report.smape))
        << '\n';
    if (baseline_crps) {
      csv << "# baseline_mean_crps," << format_double(*baseline_crps) << '\n';
      csv << "# crps_improvement_percent,"
          << format_double(
                 score_improvement_percent(*baseline_crps, report.mean_crps))
          << '\n';
    }
  }

  ensure_directory(output_dir);
  const fs::path output = opts.output_opt->count() > 0
                              ? fs::path(opts.output)
                              : output_dir / "scores.csv";
  write_text_file(output, csv.str());

  nlohmann::ordered_json settings;
  settings["model"] = model_path;
  settings["panel"] = panel_path;
  settings["holdout"] = holdout_path;
  if (have_baseline) {
    settings["baseline"] = resolve<std::string>(
        opts.baseline_opt, opts.baseline,
        config.text({"score", "baseline_csv"}), "");
  }
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = panel.digest_hex();
  inputs["holdout_digest"] = holdout.digest_hex();
  write_manifest(output_dir, "score", settings, inputs);

  std::cout << "smape=" << format_double(report.smape)
            << " mean_crps=" << format_double(report.mean_crps) << '\n';
  if (baseline_smape) {
    std::cout << "smape_improvement_percent="
              << format_double(score_improvement_percent(*baseline_smape,
                                                         report.smape))
              << '\n';
  }
  std::cout << "scores written to " << output.string() << '\n';
}

// ----------------------------------------------------------- improvement

struct ImprovementOpts {
  CommonOpts common;
  std::string model;
  CLI::Option* model_opt = nullptr;
  std::string panel;
  CLI::Option* panel_opt = nullptr;
  std::string observed;
  CLI::Option* observed_opt = nullptr;
  std::vector<std::string> populations;
  CLI::Option* populations_opt = nullptr;
  std::string ages;
  CLI::Option* ages_opt = nullptr;
  std::string years;
  CLI::Option* years_opt = nullptr;
  bool allow_mismatch = false;
  CLI::Option* mismatch_opt = nullptr;
  std::string output;
  CLI::Option* output_opt = nullptr;
};

void run_improvement(const ImprovementOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const bool model_mode = opts.model_opt->count() > 0 ||
                          config.text({"predict", "model"}).has_value();
  const bool observed_mode = opts.observed_opt->count() > 0;
  if (model_mode == observed_mode) {
    throw CliError("usage",
                   "exactly one of --model (smoothed) or --observed (raw)");
  }

  std::vector<ImprovementFactor> factors;
  std::vector<std::string> populations;
  nlohmann::ordered_json settings;
  nlohmann::ordered_json inputs;
  if (observed_mode) {
    const MortalityPanel panel = load_panel(opts.observed);
    std::vector<Cell> cells;
    cells.reserve(panel.size());
    for (const Observation& obs : panel.observations()) {
      cells.push_back(Cell{obs.population, obs.age, obs.year});
    }
    factors = with_category("data", [&] {
      return improvement_factors(cells, panel.targets());
    });
    populations = panel.populations();
    settings["observed"] = opts.observed;
    inputs["panel_digest"] = panel.digest_hex();
  } else {
    PredictOpts forward;
    forward.common = opts.common;
    forward.model = opts.model;
    forward.model_opt = opts.model_opt;
    forward.panel = opts.panel;
    forward.panel_opt = opts.panel_opt;
    forward.populations = opts.populations;
    forward.populations_opt = opts.populations_opt;
    forward.ages = opts.ages;
    forward.ages_opt = opts.ages_opt;
    forward.years = opts.years;
    forward.years_opt = opts.years_opt;
    forward.allow_mismatch = opts.allow_mismatch;
    forward.mismatch_opt = opts.mismatch_opt;
    const PredictionSetup setup = prepare_prediction(forward, config);
    MeanModel mean;
    mean.scenario = setup.model.mean.scenario;
    mean.improvement_rate = setup.model.mean.improvement_rate;
    const Posterior posterior = run_numeric([&] {
      return Posterior(setup.panel, setup.model.kernel, mean);
    });
    const PredictionSummary summary =
        run_numeric([&] { return posterior.predict(setup.cells); });
    factors = with_category("data", [&] {
      return improvement_factors(setup.cells, summary.mean);
    });
    populations = setup.model.populations;
    settings["model"] = opts.model;
    settings["panel"] = opts.panel;
    settings["ages"] = {setup.ages.first, setup.ages.second};
    settings["years"] = {setup.years.first, setup.years.second};
    inputs["panel_digest"] = setup.panel.digest_hex();
  }

  std::ostringstream out;
  out << "population,age,year,improvement\n";
  for (const ImprovementFactor& factor : factors) {
    out << populations[static_cast<std::size_t>(factor.cell.population)]
        << ',' << format_double(factor.cell.age) << ','
        << format_double(factor.cell.year) << ','
        << format_double(factor.factor) << '\n';
  }
  ensure_directory(output_dir);
  const fs::path output = opts.output_opt->count() > 0
                              ? fs::path(opts.output)
                              : output_dir / "improvements.csv";
  write_text_file(output, out.str());
  write_manifest(output_dir, "improvement", settings, inputs);
  std::cout << "factors=" << factors.size() << " written to "
            << output.string() << '\n';
}

// ---------------------------------------------------------- correlations

struct CorrelationsOpts {
  CommonOpts common;
  std::string model;
  CLI::Option* model_opt = nullptr;
  std::string output;
  CLI::Option* output_opt = nullptr;
};

void run_correlations(const CorrelationsOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const std::string model_path = resolve_required<std::string>(
      opts.model_opt, opts.model, config.text({"predict", "model"}),
      "model JSON (--model)");
  const FittedModel model = load_model_checked(model_path);
  const Eigen::MatrixXd r = with_category("model", [&] {
    return correlation_matrix(model);
  });
  const std::string csv = matrix_csv(r, model.populations);

  ensure_directory(output_dir);
  const fs::path output = opts.output_opt->count() > 0
                              ? fs::path(opts.output)
                              : output_dir / "correlations.csv";
  write_text_file(output, csv);
  nlohmann::ordered_json settings;
  settings["model"] = model_path;
  nlohmann::ordered_json inputs;
  inputs["model_digest"] = model.panel_digest;
  write_manifest(output_dir, "correlations", settings, inputs);

  std::cout << csv;
  std::cout << "correlations written to " << output.string() << '\n';
}

// --------------------------------------------------------------- cluster

struct ClusterOpts {
  CommonOpts common;
  std::string panel;
  CLI::Option* panel_opt = nullptr;
  std::string linkage = "single";
  CLI::Option* linkage_opt = nullptr;
  std::string age_window;
  CLI::Option* age_window_opt = nullptr;
  std::string year_window;
  CLI::Option* year_window_opt = nullptr;
};

void run_cluster(const ClusterOpts& opts) {
  const Config config = load_config(opts.common);
  const fs::path output_dir = resolve_output_dir(opts.common, config);
  const std::string panel_path = resolve_required<std::string>(
      opts.panel_opt, opts.panel, config.text({"data", "panel_csv"}),
      "panel CSV (--panel)");
  const std::string linkage_name = resolve<std::string>(
      opts.linkage_opt, opts.linkage, config.text({"cluster", "linkage"}),
      "single");
  const Linkage linkage = with_category("usage", [&] {
    return linkage_from_string(linkage_name);
  });

  const MortalityPanel panel = load_panel(panel_path);
  if (panel.population_count() < 2) {
    throw CliError("data", "clustering needs at least two populations");
  }

  TrendWindow window;
  if (opts.age_window_opt->count() > 0) {
    std::tie(window.age_lo, window.age_hi) = parse_real_range(opts.age_window);
  } else if (const auto pair = config.int_pair({"cluster", "age_window"})) {
    window.age_lo = pair->first;
    window.age_hi = pair->second;
  } else {
    window.age_lo = panel.observations().front().age;
    window.age_hi = window.age_lo;
    for (const Observation& obs : panel.observations()) {
      window.age_lo = std::min(window.age_lo, obs.age);
      window.age_hi = std::max(window.age_hi, obs.age);
    }
  }
  if (opts.year_window_opt->count() > 0) {
    std::tie(window.year_lo, window.year_hi) =
        parse_real_range(opts.year_window);
  } else if (const auto pair = config.int_pair({"cluster", "year_window"})) {
    window.year_lo = pair->first;
    window.year_hi = pair->second;
  } else {
    window.year_lo = panel.observations().front().year;
    window.year_hi = window.year_lo;
    for (const Observation& obs : panel.observations()) {
      window.year_lo = std::min(window.year_lo, obs.year);
      window.year_hi = std::max(window.year_hi, obs.year);
    }
  }

  const std::vector<TrendCoefficients> trends = with_category("data", [&] {
    return trend_coefficients(panel);
  });
  const Eigen::MatrixXd distances = with_category("data", [&] {
    return trend_distance_matrix(trends, window);
  });
  const Dendrogram tree = with_category("data", [&] {
    return hierarchical_cluster(distances, linkage);
  });
  const std::string newick = to_newick(tree, panel.populations());

  ensure_directory(output_dir);
  write_text_file(output_dir / "trend_distances.csv",
                  matrix_csv(distances, panel.populations()));
  {
    std::ostringstream merges;
    write_merges_csv(merges, tree, panel.populations());
    write_text_file(output_dir / "merges.csv", merges.str());
  }
  write_text_file(output_dir / "tree.newick", newick + "\n");

  nlohmann::ordered_json settings;
  settings["panel"] = panel_path;
  settings["linkage"] = linkage_name;
  settings["age_window"] = {window.age_lo, window.age_hi};
  settings["year_window"] = {window.year_lo, window.year_hi};
  nlohmann::ordered_json inputs;
  inputs["panel_digest"] = panel.digest_hex();
  write_manifest(output_dir, "cluster", settings, inputs);

  std::cout << newick << '\n';
  std::cout << "cluster outputs written to " << output_dir.string() << '\n';
}

}  // namespace

void register_commands(CLI::App& app) {
  {
    auto opts = std::make_shared<IngestOpts>();
    CLI::App* cmd = app.add_subcommand(
        "ingest", "Parse mortality tables and write a canonical panel CSV");
    add_common(cmd, opts->common);
    opts->sources_opt = cmd->add_option(
        "--source", opts->sources, "Death-rate table as POP=PATH (repeatable)");
    opts->deaths_opt = cmd->add_option("--deaths", opts->deaths,
                                       "Deaths table as POP=PATH");
    opts->exposures_opt = cmd->add_option("--exposures", opts->exposures,
                                          "Exposure table as POP=PATH");
    opts->column_opt = cmd->add_option("--column", opts->column,
                                       "Gender column: female|male|total");
    opts->ages_opt = cmd->add_option("--ages", opts->ages, "Age range LO:HI");
    opts->years_opt =
        cmd->add_option("--years", opts->years, "Year range LO:HI");
    opts->notches_opt = cmd->add_option(
        "--notch", opts->notches, "Per-population years POP=LO:HI");
    opts->output_opt =
        cmd->add_option("--output", opts->output, "Panel CSV path");
    cmd->callback([opts] { run_ingest(*opts); });
  }
  {
    auto opts = std::make_shared<FitOpts>();
    CLI::App* cmd = app.add_subcommand(
        "fit", "Estimate hyperparameters and write the model JSON");
    add_common(cmd, opts->common);
    add_fit_options(cmd, *opts);
    cmd->callback([opts] { run_fit(*opts); });
  }
  {
    auto opts = std::make_shared<PredictOpts>();
    CLI::App* cmd = app.add_subcommand(
        "predict", "Forecast log-mortality over an age/year grid");
    add_common(cmd, opts->common);
    opts->model_opt = cmd->add_option("--model", opts->model, "Model JSON");
    opts->panel_opt =
        cmd->add_option("--panel", opts->panel, "Training panel CSV");
    opts->populations_opt = cmd->add_option(
        "--pop", opts->populations, "Population name (repeatable; default all)");
    opts->ages_opt = cmd->add_option("--ages", opts->ages, "Age range LO:HI");
    opts->years_opt =
        cmd->add_option("--years", opts->years, "Year range LO:HI");
    opts->joint_opt = cmd->add_flag("--joint", opts->joint,
                                    "Also write the joint posterior covariance");
    opts->samples_opt = cmd->add_option(
        "--samples", opts->samples, "Number of joint posterior sample paths");
    opts->seed_opt = cmd->add_option("--seed", opts->seed, "Sampling seed");
    opts->mismatch_opt = cmd->add_flag(
        "--allow-digest-mismatch", opts->allow_mismatch,
        "Predict from a panel that differs from the fitted one");
    opts->output_opt =
        cmd->add_option("--output", opts->output, "Predictions CSV path");
    cmd->callback([opts] { run_predict(*opts); });
  }
  {
    auto opts = std::make_shared<ScoreOpts>();
    CLI::App* cmd = app.add_subcommand(
        "score", "Score forecasts against held-out observations");
    add_common(cmd, opts->common);
    opts->model_opt = cmd->add_option("--model", opts->model, "Model JSON");
    opts->panel_opt =
        cmd->add_option("--panel", opts->panel, "Training panel CSV");
    opts->holdout_opt =
        cmd->add_option("--holdout", opts->holdout, "Holdout panel CSV");
    opts->baseline_opt = cmd->add_option(
        "--baseline", opts->baseline,
        "Previous scores CSV; reports improvement percentages");
    opts->mismatch_opt = cmd->add_flag(
        "--allow-digest-mismatch", opts->allow_mismatch,
        "Score from a panel that differs from the fitted one");
    opts->output_opt =
        cmd->add_option("--output", opts->output, "Scores CSV path");
    cmd->callback([opts] { run_score(*opts); });
  }
  {
    auto opts = std::make_shared<ImprovementOpts>();
    CLI::App* cmd = app.add_subcommand(
        "improvement", "Year-over-year mortality improvement factors");
    add_common(cmd, opts->common);
    opts->model_opt = cmd->add_option(
        "--model", opts->model, "Model JSON (smoothed factors from forecasts)");
    opts->panel_opt =
        cmd->add_option("--panel", opts->panel, "Training panel CSV");
    opts->observed_opt = cmd->add_option(
        "--observed", opts->observed, "Panel CSV (raw factors from data)");
    opts->populations_opt = cmd->add_option(
        "--pop", opts->populations, "Population name (repeatable; default all)");
    opts->ages_opt = cmd->add_option("--ages", opts->ages, "Age range LO:HI");
    opts->years_opt =
        cmd->add_option("--years", opts->years, "Year range LO:HI");
    opts->mismatch_opt = cmd->add_flag(
        "--allow-digest-mismatch", opts->allow_mismatch,
        "Use a panel that differs from the fitted one");
    opts->output_opt =
        cmd->add_option("--output", opts->output, "Improvements CSV path");
    cmd->callback([opts] { run_improvement(*opts); });
  }
  {
    auto opts = std::make_shared<CorrelationsOpts>();
    CLI::App* cmd = app.add_subcommand(
        "correlations", "Cross-population correlations implied by a model");
    add_common(cmd, opts->common);
    opts->model_opt = cmd->add_option("--model", opts->model, "Model JSON");
    opts->output_opt =
        cmd->add_option("--output", opts->output, "Correlations CSV path");
    cmd->callback([opts] { run_correlations(*opts); });
  }
  {
    auto opts = std::make_shared<ClusterOpts>();
    CLI::App* cmd = app.add_subcommand(
        "cluster", "Hierarchical clustering of population mortality trends");
    add_common(cmd, opts->common);
    opts->panel_opt = cmd->add_option("--panel", opts->panel, "Panel CSV");
    opts->linkage_opt = cmd->add_option("--linkage", opts->linkage,
                                        "single|complete (default single)");
    opts->age_window_opt = cmd->add_option(
        "--age-window", opts->age_window,
        "Trend-distance age window LO:HI (default panel span)");
    opts->year_window_opt = cmd->add_option(
        "--year-window", opts->year_window,
        "Trend-distance year window LO:HI (default panel span)");
    cmd->callback([opts] { run_cluster(*opts); });
  }
  {
    auto opts = std::make_shared<FitOpts>();
    CLI::App* cmd = app.add_subcommand(
        "bic-scan", "Fit ICM rank candidates and tabulate BIC");
    add_common(cmd, opts->common);
    add_fit_options(cmd, *opts);
    cmd->callback([opts] { run_bic_scan(*opts); });
  }
}

}  // namespace mortgp::cli
