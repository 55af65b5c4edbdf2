#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atrophy/extract/extract.hpp"
#include "atrophy/pbvc/pbvc.hpp"
#include "atrophy/register/register.hpp"
#include "atrophy/segment/segment.hpp"

namespace atrophy {

enum class Extractor { Threshold, External };
enum class Segmenter { KMeans3, External };

/// Analogs of the four pipeline variants: built-in threshold extraction and
/// k-means stand in for the classical tools, external files for the learned
/// ones.
enum class Variant { Vanilla, SS, SEG, SSSEG };

std::string_view variant_name(Variant v);  // "VANILLA-ANALOG", ...
std::string_view variant_short(Variant v);  // "vanilla", "ss", "seg", "ss-seg"
/// Accepts either spelling, case-insensitively.
Variant parse_variant(std::string_view s);
Extractor extractor_of(Variant v);
Segmenter segmenter_of(Variant v);
Variant variant_of(Extractor e, Segmenter s);
std::string_view extractor_name(Extractor e);  // "threshold" | "external"
std::string_view segmenter_name(Segmenter s);  // "kmeans3" | "external"

struct PipelineConfig {
  Variant variant = Variant::Vanilla;
  double extract_frac = 0.35;
  SkullOptions skull;
  RegistrationOptions reg;
  PbvcOptions pbvc;
  bool calibrate = true;
  double s_cal = 0.995;
  std::uint64_t seed = 0;
};

/// Stable text form of every option that can change a result; hashed into
/// report headers and cache keys.
std::string canonical_config_text(const PipelineConfig& cfg);
std::uint64_t config_hash(const PipelineConfig& cfg);

struct ScanInput {
  Volume image;
  std::optional<BinaryMask> mask;            // external extractor
  double mask_discarded_fraction = 0.0;
  std::optional<AnatomicalLabelMap> labels;  // external segmenter
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineRun {
  PBVCResult result;
  std::vector<StageTiming> timings;
  std::string extractor;
  std::string segmenter;
  std::uint64_t extract_hash_a = 0, extract_hash_b = 0;
  std::uint64_t skull_hash_a = 0, skull_hash_b = 0;
  std::size_t skull_points_a = 0, skull_points_b = 0;
  Affine4 forward;
  double reg_cost_ab = 0.0, reg_cost_ba = 0.0;
  std::vector<std::int32_t> unmapped_codes;
  double mask_discarded_fraction = 0.0;  // max over the two scans
  std::vector<EdgeSample> edges_forward, edges_backward;  // only with keep_edges

  double total_seconds() const;
};

/// Checks that the inputs required by the variant are present and on the
/// scan grids. Throws before any compute.
void validate_inputs(const ScanInput& a, const ScanInput& b, const PipelineConfig& cfg);

/// Extraction, skull masks, symmetric registration, halfway resampling,
/// segmentation, forward and backward passes, then calibration when
/// enabled. Stage failures are rethrown as StageError.
PipelineRun pbvc_symmetric(const ScanInput& a, const ScanInput& b, const PipelineConfig& cfg,
                           bool keep_edges = false);

/// Copy of `a` with the brain radially scaled by s about the region
/// centroid inside `region`; external mask and labels follow.
ScanInput scale_brain(const ScanInput& a, const BinaryMask& region, double s);

/// 100 (s_cal^3 - 1) / measured, where measured comes from an uncalibrated
/// run on (a, scale_brain(a, dilated extraction mask, s_cal)).
double calibrate_pbvc(const ScanInput& a, const PipelineConfig& cfg);

/// calibrate_pbvc memoized per (scan content, config). Thread-safe.
double calibrate_pbvc_cached(const ScanInput& a, const PipelineConfig& cfg);
void clear_calibration_cache();

}  // namespace atrophy
