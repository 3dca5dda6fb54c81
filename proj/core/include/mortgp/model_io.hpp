#pragma once

#include <filesystem>
#include <string>

#include "mortgp/fit.hpp"

namespace mortgp {

// Canonical JSON form of a fitted model: fixed key order and shortest
// round-trippable numbers, so serialize(parse(text)) == text.
[[nodiscard]] std::string model_to_json(const FittedModel& model);

// Parses and validates. Throws std::runtime_error on malformed JSON, an
// unknown schema version, or values violating kernel/mean invariants
// (e.g. a negative length scale).
[[nodiscard]] FittedModel model_from_json(const std::string& text);

void save_model(const FittedModel& model, const std::filesystem::path& path);
[[nodiscard]] FittedModel load_model(const std::filesystem::path& path);

}  // namespace mortgp
