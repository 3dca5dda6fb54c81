#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace mortgp::cli {

// Failure carrying the machine-parsable category printed as
// "error: <category>: <message>". Categories: usage, config, io, data,
// model, numeric.
class CliError : public std::runtime_error {
 public:
  CliError(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  [[nodiscard]] const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Reruns library code under a default error category.
template <typename F>
auto with_category(const char* category, F&& run) -> decltype(run()) {
  try {
    return run();
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& error) {
    throw CliError(category, error.what());
  }
}

[[nodiscard]] bool debug_logging();  // MORTGP_LOG=debug
void log_debug(const std::string& message);

// Shortest round-trippable decimal text for a double.
[[nodiscard]] std::string format_double(double value);

// "LO:HI" with LO <= HI.
[[nodiscard]] std::pair<int, int> parse_int_range(const std::string& text);
[[nodiscard]] std::pair<double, double> parse_real_range(
    const std::string& text);
// "NAME=VALUE".
[[nodiscard]] std::pair<std::string, std::string> parse_assignment(
    const std::string& text);
[[nodiscard]] std::vector<int> parse_int_list(const std::string& text);

// Nested JSON config with typed lookups; every getter returns nullopt when
// the path is absent and throws CliError("config", ...) on a type mismatch.
class Config {
 public:
  Config() = default;
  static Config load(const std::filesystem::path& path);

  [[nodiscard]] std::optional<double> number(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<int> integer(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<bool> boolean(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<std::string> text(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<std::pair<int, int>> int_pair(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<std::vector<int>> int_list(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] std::optional<std::vector<std::string>> text_list(
      std::initializer_list<const char*> path) const;
  [[nodiscard]] const nlohmann::json* node(
      std::initializer_list<const char*> path) const;

 private:
  nlohmann::json doc_ = nlohmann::json::object();
};

// Flag wins when given, then config, then the fallback.
template <typename T>
[[nodiscard]] T resolve(const CLI::Option* option, const T& flag_value,
                        const std::optional<T>& config_value,
                        const T& fallback) {
  if (option != nullptr && option->count() > 0) return flag_value;
  if (config_value) return *config_value;
  return fallback;
}

template <typename T>
[[nodiscard]] T resolve_required(const CLI::Option* option,
                                 const T& flag_value,
                                 const std::optional<T>& config_value,
                                 const char* what) {
  if (option != nullptr && option->count() > 0) return flag_value;
  if (config_value) return *config_value;
  throw CliError("usage", std::string("missing required setting: ") + what);
}

void ensure_directory(const std::filesystem::path& dir);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

// Deterministic run metadata: resolved settings plus input digests, no
// timestamps, so identical runs write identical manifests.
void write_manifest(const std::filesystem::path& output_dir,
                    const std::string& command,
                    const nlohmann::ordered_json& settings,
                    const nlohmann::ordered_json& inputs);

}  // namespace mortgp::cli
