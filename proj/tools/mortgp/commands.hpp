#pragma once

#include <CLI11.hpp>

namespace mortgp::cli {

// Registers the subcommands: ingest, fit, predict, score, improvement,
// correlations, cluster, bic-scan. Callbacks throw CliError on failure.
void register_commands(CLI::App& app);

}  // namespace mortgp::cli
