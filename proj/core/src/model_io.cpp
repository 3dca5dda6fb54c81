#include "mortgp/model_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace mortgp {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

ordered_json beta_to_json(const FittedModel& model) {
  const int populations = static_cast<int>(model.populations.size());
  const Eigen::VectorXd& beta = model.mean.beta;
  const bool has_year = model.mean.scenario != TrendScenario::kFlat;
  ordered_json out;
  out["intercept"] = beta[0];
  out["age"] = beta[1];
  if (has_year) out["year"] = beta[2];
  ordered_json dummies = ordered_json::object();
  const int offset = has_year ? 3 : 2;
  for (int l = 1; l < populations; ++l) {
    dummies[model.populations[static_cast<std::size_t>(l)]] =
        beta[offset + l - 1];
  }
  out["populations"] = std::move(dummies);
  return out;
}

const ordered_json& require(const ordered_json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw std::runtime_error(std::string("missing key '") + key + "'");
  }
  return *it;
}

double require_double(const ordered_json& obj, const char* key) {
  const ordered_json& value = require(obj, key);
  if (!value.is_number()) {
    throw std::runtime_error(std::string("key '") + key +
                             "' must be a number");
  }
  return value.get<double>();
}

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                const char* where) {
  for (const auto& item : obj.items()) {
    if (!allowed.contains(item.key())) {
      throw std::runtime_error(std::string("unexpected key '") + item.key() +
                               "' in " + where);
    }
  }
}

FittedModel parse_model(const ordered_json& doc) {
  if (!doc.is_object()) {
    throw std::runtime_error("document must be a JSON object");
  }
  check_keys(doc,
             {"schema_version", "family", "populations", "scenario",
              "theta_ag", "theta_yr", "eta2", "cross_thetas", "Q", "A",
              "sigma2", "beta", "improvement_rate", "scaling", "loglik", "k",
              "bic", "panel_digest", "fit"},
             "model document");
  const ordered_json& version = require(doc, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw std::runtime_error("unsupported schema_version");
  }

  FittedModel model;
  const ordered_json& names = require(doc, "populations");
  if (!names.is_array() || names.empty()) {
    throw std::runtime_error("'populations' must be a nonempty array");
  }
  std::set<std::string> seen;
  for (const ordered_json& name : names) {
    if (!name.is_string() || name.get<std::string>().empty() ||
        !seen.insert(name.get<std::string>()).second) {
      throw std::runtime_error("'populations' must hold unique names");
    }
    model.populations.push_back(name.get<std::string>());
  }
  const int populations = static_cast<int>(model.populations.size());

  KernelSpec& kernel = model.kernel;
  kernel.family =
      kernel_family_from_string(require(doc, "family").get<std::string>());
  kernel.se.length_age = require_double(doc, "theta_ag");
  kernel.se.length_year = require_double(doc, "theta_yr");
  const bool is_icm = kernel.family == KernelFamily::kIcm;
  if (is_icm) {
    if (doc.contains("eta2") || doc.contains("cross_thetas")) {
      throw std::runtime_error("ICM models carry loadings, not eta2/thetas");
    }
    kernel.se.process_variance = 1.0;
    const ordered_json& q_value = require(doc, "Q");
    if (!q_value.is_number_integer()) {
      throw std::runtime_error("'Q' must be an integer");
    }
    const int rank = q_value.get<int>();
    const ordered_json& rows = require(doc, "A");
    if (!rows.is_array() || static_cast<int>(rows.size()) != populations) {
      throw std::runtime_error("'A' must hold one row per population");
    }
    kernel.loadings.resize(populations, rank);
    for (int l = 0; l < populations; ++l) {
      const ordered_json& row = rows[static_cast<std::size_t>(l)];
      if (!row.is_array() || static_cast<int>(row.size()) != rank) {
        throw std::runtime_error("'A' rows must have Q entries");
      }
      for (int q = 0; q < rank; ++q) {
        const ordered_json& entry = row[static_cast<std::size_t>(q)];
        if (!entry.is_number()) {
          throw std::runtime_error("'A' entries must be numbers");
        }
        kernel.loadings(l, q) = entry.get<double>();
      }
    }
  } else {
    if (doc.contains("Q") || doc.contains("A")) {
      throw std::runtime_error("'Q' and 'A' apply to ICM models only");
    }
    kernel.se.process_variance = require_double(doc, "eta2");
    if (kernel.family == KernelFamily::kFullRank) {
      const ordered_json& thetas = require(doc, "cross_thetas");
      const std::size_t expected = CrossThetas::pair_count(populations);
      if (!thetas.is_array() || thetas.size() != expected) {
        throw std::runtime_error(
            "'cross_thetas' must hold L(L-1)/2 entries");
      }
      std::vector<double> values;
      for (const ordered_json& theta : thetas) {
        if (!theta.is_number()) {
          throw std::runtime_error("'cross_thetas' entries must be numbers");
        }
        values.push_back(theta.get<double>());
      }
      kernel.cross = CrossThetas(populations, std::move(values));
    } else if (doc.contains("cross_thetas")) {
      throw std::runtime_error(
          "'cross_thetas' applies to full_rank models only");
    }
  }
  const ordered_json& sigma2 = require(doc, "sigma2");
  if (!sigma2.is_array() || static_cast<int>(sigma2.size()) != populations) {
    throw std::runtime_error("'sigma2' must hold one entry per population");
  }
  kernel.noise_variances.resize(populations);
  for (int l = 0; l < populations; ++l) {
    const ordered_json& entry = sigma2[static_cast<std::size_t>(l)];
    if (!entry.is_number()) {
      throw std::runtime_error("'sigma2' entries must be numbers");
    }
    kernel.noise_variances[l] = entry.get<double>();
  }
  kernel.validate(populations);

  MeanModel& mean = model.mean;
  mean.scenario =
      trend_scenario_from_string(require(doc, "scenario").get<std::string>());
  if (mean.scenario == TrendScenario::kFixedYear) {
    mean.improvement_rate = require_double(doc, "improvement_rate");
    if (!(mean.improvement_rate > 0) ||
        !std::isfinite(mean.improvement_rate)) {
      throw std::runtime_error("'improvement_rate' must be positive");
    }
  } else if (doc.contains("improvement_rate")) {
    throw std::runtime_error(
        "'improvement_rate' applies to the fixed-trend scenario only");
  }
  const ordered_json& beta = require(doc, "beta");
  check_keys(beta, {"intercept", "age", "year", "populations"}, "'beta'");
  const bool has_year = mean.scenario != TrendScenario::kFlat;
  if (!has_year && beta.contains("year")) {
    throw std::runtime_error("'beta.year' needs a year term in the mean");
  }
  mean.beta.resize(mean_dimension(mean.scenario, populations));
  mean.beta[0] = require_double(beta, "intercept");
  mean.beta[1] = require_double(beta, "age");
  if (has_year) mean.beta[2] = require_double(beta, "year");
  const ordered_json& dummies = require(beta, "populations");
  if (!dummies.is_object() ||
      static_cast<int>(dummies.size()) != populations - 1) {
    throw std::runtime_error(
        "'beta.populations' must hold every non-baseline population");
  }
  const int offset = has_year ? 3 : 2;
  for (int l = 1; l < populations; ++l) {
    mean.beta[offset + l - 1] = require_double(
        dummies, model.populations[static_cast<std::size_t>(l)].c_str());
  }
  if (mean.scenario == TrendScenario::kFixedYear &&
      mean.beta[2] != -mean.improvement_rate) {
    throw std::runtime_error(
        "'beta.year' must equal the negated improvement rate");
  }
  for (Eigen::Index i = 0; i < mean.beta.size(); ++i) {
    if (!std::isfinite(mean.beta[i])) {
      throw std::runtime_error("mean coefficients must be finite");
    }
  }

  const ordered_json& scaling = require(doc, "scaling");
  check_keys(scaling, {"age_mean", "age_sd", "year_mean", "year_sd"},
             "'scaling'");
  model.scaling.age_mean = require_double(scaling, "age_mean");
  model.scaling.age_sd = require_double(scaling, "age_sd");
  model.scaling.year_mean = require_double(scaling, "year_mean");
  model.scaling.year_sd = require_double(scaling, "year_sd");
  if (!(model.scaling.age_sd > 0) || !(model.scaling.year_sd > 0)) {
    throw std::runtime_error("scaling sds must be positive");
  }

  model.log_likelihood = require_double(doc, "loglik");
  const ordered_json& k = require(doc, "k");
  if (!k.is_number_integer() || k.get<int>() < 0) {
    throw std::runtime_error("'k' must be a nonnegative integer");
  }
  model.parameter_count = k.get<int>();
  model.bic = require_double(doc, "bic");

  const ordered_json& digest = require(doc, "panel_digest");
  if (!digest.is_string()) {
    throw std::runtime_error("'panel_digest' must be a string");
  }
  model.panel_digest = digest.get<std::string>();
  if (model.panel_digest.size() != 16 ||
      model.panel_digest.find_first_not_of("0123456789abcdef") !=
          std::string::npos) {
    throw std::runtime_error("'panel_digest' must be 16 lowercase hex chars");
  }

  if (doc.contains("fit")) {
    const ordered_json& fit = doc["fit"];
    check_keys(fit, {"seed", "n_starts", "best_start", "converged"}, "'fit'");
    model.diagnostics.seed = require(fit, "seed").get<std::uint64_t>();
    model.diagnostics.n_starts = require(fit, "n_starts").get<int>();
    model.diagnostics.best_start = require(fit, "best_start").get<int>();
    const ordered_json& converged = require(fit, "converged");
    if (!converged.is_boolean()) {
      throw std::runtime_error("'fit.converged' must be a boolean");
    }
    model.diagnostics.converged = converged.get<bool>();
  }
  return model;
}

}  // namespace

std::string model_to_json(const FittedModel& model) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["family"] = to_string(model.kernel.family);
  doc["populations"] = model.populations;
  doc["scenario"] = to_string(model.mean.scenario);
  doc["theta_ag"] = model.kernel.se.length_age;
  doc["theta_yr"] = model.kernel.se.length_year;
  if (model.kernel.family == KernelFamily::kIcm) {
    doc["Q"] = model.kernel.rank();
    ordered_json rows = ordered_json::array();
    for (Eigen::Index l = 0; l < model.kernel.loadings.rows(); ++l) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index q = 0; q < model.kernel.loadings.cols(); ++q) {
        row.push_back(model.kernel.loadings(l, q));
      }
      rows.push_back(std::move(row));
    }
    doc["A"] = std::move(rows);
  } else {
    doc["eta2"] = model.kernel.se.process_variance;
    if (model.kernel.family == KernelFamily::kFullRank) {
      doc["cross_thetas"] = model.kernel.cross.values();
    }
  }
  doc["sigma2"] = std::vector<double>(
      model.kernel.noise_variances.data(),
      model.kernel.noise_variances.data() + model.kernel.noise_variances.size());
  doc["beta"] = beta_to_json(model);
  if (model.mean.scenario == TrendScenario::kFixedYear) {
    doc["improvement_rate"] = model.mean.improvement_rate;
  }
  doc["scaling"] = {{"age_mean", model.scaling.age_mean},
                    {"age_sd", model.scaling.age_sd},
                    {"year_mean", model.scaling.year_mean},
                    {"year_sd", model.scaling.year_sd}};
  doc["loglik"] = model.log_likelihood;
  doc["k"] = model.parameter_count;
  doc["bic"] = model.bic;
  doc["panel_digest"] = model.panel_digest;
  doc["fit"] = {{"seed", model.diagnostics.seed},
                {"n_starts", model.diagnostics.n_starts},
                {"best_start", model.diagnostics.best_start},
                {"converged", model.diagnostics.converged}};
  return doc.dump(2) + "\n";
}

FittedModel model_from_json(const std::string& text) {
  try {
    const ordered_json doc = ordered_json::parse(text);
    return parse_model(doc);
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& error) {
    throw std::runtime_error(std::string("model JSON invalid: ") +
                             error.what());
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << model_to_json(model);
  if (!out.flush()) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open model file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace mortgp
