#pragma once

#include <iosfwd>

#include "json.hpp"
#include "mustan/metrics.hpp"

namespace mustan {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace mustan
