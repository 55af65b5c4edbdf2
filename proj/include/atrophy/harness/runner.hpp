#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atrophy/harness/manifest.hpp"
#include "atrophy/pbvc/pipeline.hpp"

namespace atrophy {

struct RunOptions {
  /// `code,name` CSV for external label maps.
  std::optional<std::filesystem::path> codebook;
  bool keep_edges = false;
  /// Feed (t1, t0) instead of (t0, t1).
  bool reversed = false;
};

/// Throws when the variant needs a mask, label map or codebook that the row
/// or options do not provide. No file is read.
void validate_config(const ManifestRow& pair, const PipelineConfig& cfg, const RunOptions& opts = {});

/// Reads the inputs (timed as stage "load") and runs pbvc_symmetric.
PipelineRun run_pipeline(const ManifestRow& pair, const PipelineConfig& cfg,
                         const RunOptions& opts = {});

struct ResultRow {
  std::string subject_id;
  Variant variant = Variant::Vanilla;
  std::uint64_t config_hash = 0;
  PipelineRun run;
};

struct FailureRow {
  std::string subject_id;
  Variant variant = Variant::Vanilla;
  std::uint64_t config_hash = 0;
  std::string stage;  // "input", "config", "load" or a pipeline stage
  std::string message;
};

struct TimingSummary {
  Variant variant = Variant::Vanilla;
  std::size_t n = 0;
  double mean_seconds = 0.0;
  double sd_seconds = 0.0;  // sample SD, 0 for n = 1
};

struct RunReport {
  std::vector<PipelineConfig> configs;
  std::uint64_t seed = 0;
  std::vector<ResultRow> results;    // by (subject_id, variant)
  std::vector<FailureRow> failures;  // by (subject_id, variant)
  std::vector<TimingSummary> timing; // per variant, in config order
};

/// FNV-1a over the canonical text of every config, in order.
std::uint64_t run_config_hash(const std::vector<PipelineConfig>& cfgs);

/// Runs every (subject, config) cell on up to `parallelism` worker threads.
/// A failing cell is recorded and does not stop the batch. Configs must
/// have distinct variants.
RunReport run_batch(const SubjectManifest& manifest, const std::vector<PipelineConfig>& cfgs,
                    int parallelism, const RunOptions& opts = {});

/// Calls f(i) for i in [0, n) from up to `parallelism` threads. Exceptions
/// escaping f are rethrown after all tasks finish (the first by index).
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& f);

/// Value rounded to 6 significant digits, as emitted in reports.
double report_number(double v);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// The JSON report: meta, results, failures, aggregates. Timing values sit
/// under "timings" and "timing" keys; the only other run-dependent field is
/// meta.timestamp.
std::string report_json(const RunReport& r, const std::string& timestamp);

/// Per-edge CSV: point_x,point_y,point_z,normal_x,normal_y,normal_z,
/// displacement_mm,quality,accepted.
void write_edges_csv(const std::vector<EdgeSample>& edges, const std::filesystem::path& path);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace atrophy
