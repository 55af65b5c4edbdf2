#pragma once

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "atrophy/harness/runner.hpp"

namespace atrophy::report {

using Json = nlohmann::ordered_json;

inline Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return report_number(v);
}

/// version, config_hash, seed, timestamp, configs, conventions.
Json meta(const std::vector<PipelineConfig>& cfgs, std::uint64_t seed, const std::string& timestamp);

Json results(const std::vector<ResultRow>& rows);
Json failures(const std::vector<FailureRow>& rows);
Json timing(const std::vector<TimingSummary>& t);

}  // namespace atrophy::report
