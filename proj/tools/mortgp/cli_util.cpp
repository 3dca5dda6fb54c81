#include "cli_util.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <system_error>

namespace mortgp::cli {

bool debug_logging() {
  const char* level = std::getenv("MORTGP_LOG");
  return level != nullptr && std::string(level) == "debug";
}

void log_debug(const std::string& message) {
  if (debug_logging()) std::cerr << "[mortgp] " << message << '\n';
}

std::string format_double(double value) {
  char buffer[40];
  const auto [end, ec] =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw CliError("internal", "number format failed");
  return std::string(buffer, end);
}

namespace {

int parse_int_token(const std::string& token, const std::string& context) {
  int value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw CliError("usage", "expected an integer in '" + context + "'");
  }
  return value;
}

double parse_real_token(const std::string& token,
                        const std::string& context) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw CliError("usage", "expected a number in '" + context + "'");
  }
  return value;
}

std::pair<std::string, std::string> split_on(const std::string& text,
                                             char separator,
                                             const char* expected) {
  const std::size_t at = text.find(separator);
  if (at == std::string::npos || at == 0 || at + 1 == text.size()) {
    throw CliError("usage", std::string("expected ") + expected + ", got '" +
                                text + "'");
  }
  return {text.substr(0, at), text.substr(at + 1)};
}

}  // namespace

std::pair<int, int> parse_int_range(const std::string& text) {
  const auto [lo, hi] = split_on(text, ':', "LO:HI");
  const int first = parse_int_token(lo, text);
  const int second = parse_int_token(hi, text);
  if (second < first) {
    throw CliError("usage", "range '" + text + "' is reversed");
  }
  return {first, second};
}

std::pair<double, double> parse_real_range(const std::string& text) {
  const auto [lo, hi] = split_on(text, ':', "LO:HI");
  const double first = parse_real_token(lo, text);
  const double second = parse_real_token(hi, text);
  if (!(second > first)) {
    throw CliError("usage", "range '" + text + "' must be increasing");
  }
  return {first, second};
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  return split_on(text, '=', "NAME=VALUE");
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    values.push_back(parse_int_token(token, text));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) {
    throw CliError("usage", "expected a comma-separated integer list");
  }
  return values;
}

Config Config::load(const std::filesystem::path& path) {
  Config config;
  const std::string text = read_text_file(path);
  try {
    config.doc_ = nlohmann::json::parse(text);
  } catch (const std::exception& error) {
    throw CliError("config",
                   path.string() + ": " + std::string(error.what()));
  }
  if (!config.doc_.is_object()) {
    throw CliError("config", path.string() + ": top level must be an object");
  }
  return config;
}

const nlohmann::json* Config::node(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* current = &doc_;
  for (const char* key : path) {
    if (!current->is_object()) return nullptr;
    const auto it = current->find(key);
    if (it == current->end()) return nullptr;
    current = &*it;
  }
  return current;
}

namespace {

std::string join_path(std::initializer_list<const char*> path) {
  std::string joined;
  for (const char* key : path) {
    if (!joined.empty()) joined += '.';
    joined += key;
  }
  return joined;
}

}  // namespace

std::optional<double> Config::number(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_number()) {
    throw CliError("config", "'" + join_path(path) + "' must be a number");
  }
  return value->get<double>();
}

std::optional<int> Config::integer(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_number_integer()) {
    throw CliError("config", "'" + join_path(path) + "' must be an integer");
  }
  return value->get<int>();
}

std::optional<bool> Config::boolean(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_boolean()) {
    throw CliError("config", "'" + join_path(path) + "' must be a boolean");
  }
  return value->get<bool>();
}

std::optional<std::string> Config::text(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_string()) {
    throw CliError("config", "'" + join_path(path) + "' must be a string");
  }
  return value->get<std::string>();
}

std::optional<std::pair<int, int>> Config::int_pair(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_array() || value->size() != 2 ||
      !(*value)[0].is_number_integer() || !(*value)[1].is_number_integer()) {
    throw CliError("config",
                   "'" + join_path(path) + "' must be a [lo, hi] pair");
  }
  return std::make_pair((*value)[0].get<int>(), (*value)[1].get<int>());
}

std::optional<std::vector<int>> Config::int_list(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_array()) {
    throw CliError("config",
                   "'" + join_path(path) + "' must be an integer array");
  }
  std::vector<int> values;
  for (const nlohmann::json& entry : *value) {
    if (!entry.is_number_integer()) {
      throw CliError("config",
                     "'" + join_path(path) + "' must be an integer array");
    }
    values.push_back(entry.get<int>());
  }
  return values;
}

std::optional<std::vector<std::string>> Config::text_list(
    std::initializer_list<const char*> path) const {
  const nlohmann::json* value = node(path);
  if (value == nullptr) return std::nullopt;
  if (!value->is_array()) {
    throw CliError("config",
                   "'" + join_path(path) + "' must be a string array");
  }
  std::vector<std::string> values;
  for (const nlohmann::json& entry : *value) {
    if (!entry.is_string()) {
      throw CliError("config",
                     "'" + join_path(path) + "' must be a string array");
    }
    values.push_back(entry.get<std::string>());
  }
  return values;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw CliError("io",
                   "cannot create directory " + dir.string() + ": " +
                       ec.message());
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path);
  if (!out) throw CliError("io", "cannot open for writing: " + path.string());
  out << content;
  if (!out.flush()) throw CliError("io", "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot open: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_manifest(const std::filesystem::path& output_dir,
                    const std::string& command,
                    const nlohmann::ordered_json& settings,
                    const nlohmann::ordered_json& inputs) {
  nlohmann::ordered_json manifest;
  manifest["command"] = command;
  manifest["settings"] = settings;
  manifest["inputs"] = inputs;
  write_text_file(output_dir / "run_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mortgp::cli
