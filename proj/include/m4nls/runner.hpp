#pragma once

#include <iosfwd>

#include "m4nls/config.hpp"

namespace m4nls {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// Executes one validated configuration: runs the requested operation,
/// writes CSV reports and field snapshots into the output directory, and
/// finishes with a manifest carrying checksums of every output file.
/// Returns 0 on success, 2 on a numerical failure with valid inputs.
int run(const RunConfig& cfg, std::ostream& log);

}  // namespace m4nls
