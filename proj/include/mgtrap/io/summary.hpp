#pragma once

#include <string>

#include "json.hpp"

namespace mgtrap::io {

/// Human-readable summary of a report. Throws ConfigError for a schema
/// version other than the current one or a report missing its header.
std::string summarize_report(const nlohmann::json& report);

}  // namespace mgtrap::io
