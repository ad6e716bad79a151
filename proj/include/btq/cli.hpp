#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "btq/asymptotics.hpp"

namespace btq::cli {

// Config-file errors; what() carries the full printable message.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};
struct UnknownKey : std::runtime_error {
  explicit UnknownKey(const std::string& msg) : std::runtime_error(msg) {}
};
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parsed and validated configuration: the experiment spec plus output options.
struct CliConfig {
  asymptotics::ExperimentSpec spec;
  std::string out_dir = ".";
};

// Parses `key = value` text with optional [model]/[experiment]/[thresholds]
// sections; top-level keys model/experiment/f/observables/ladder/nres/out and
// the model parameters are accepted without a section header. Unknown keys are
// rejected. Defaults (ladder, resolution) are applied during validation.
CliConfig parse_config(const std::string& text);

// Full command-line entry point (subcommands run / list-models /
// list-observables / verify / report). Returns the process exit code:
// 0 success, 1 error, 2 threshold failure (report still written).
int run_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace btq::cli
