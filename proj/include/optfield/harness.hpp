#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "optfield/serialization.hpp"

namespace optfield {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

/// Subcommands: verify-bracket, verify-theorem, verify-ofm-relation,
/// solve-ot, push-samples.
const std::vector<std::string>& subcommands();

/// Built-in configuration for a subcommand (the same documents as
/// configs/<subcommand>.json).
Json default_config(std::string_view subcommand);

/// Rejects unknown keys and type errors anywhere in the document.
void validate_config(const Json& config);

/// Command-line entry point. Writes report.json (and CSV artifacts) into the
/// output directory. Returns 0 when every check passes, 2 when a check
/// fails, 1 on any execution or configuration error.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace optfield
