#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atrophy/harness/runner.hpp"
#include "atrophy/stats/stats.hpp"

namespace atrophy {

// Scan-order consistency.

struct ConsistencyOptions {
  Variant baseline = Variant::Vanilla;
  /// Added to every forward-order PBVC before residuals are formed.
  double inject_forward_bias_pp = 0.0;
  RunOptions run;
};

struct ConsistencyPair {
  std::string subject_id;
  double pbvc_forward_order = 0.0;  // PBVC(t0, t1)
  double pbvc_reverse_order = 0.0;  // PBVC(t1, t0)
  double residual = 0.0;
};

struct VariantConsistency {
  Variant variant = Variant::Vanilla;
  std::vector<ConsistencyPair> pairs;  // manifest order
  MeanSd mfrr;
  /// Against the baseline; absent for the baseline itself, or when the
  /// baseline MFRR is zero.
  std::optional<double> relative_improvement;
  std::size_t excluded = 0;  // pairs with a failed direction
};

struct ConsistencyReport {
  Variant baseline = Variant::Vanilla;
  double injected_bias_pp = 0.0;
  std::vector<VariantConsistency> variants;  // config order
  RunReport forward;  // runs on (t0, t1)
  RunReport reverse;  // runs on (t1, t0)
};

/// Each (subject, config) cell runs the full pipeline on (t0, t1) and on
/// (t1, t0). A pair with either direction failed is excluded and counted.
ConsistencyReport consistency_experiment(const SubjectManifest& manifest,
                                         const std::vector<PipelineConfig>& cfgs, int parallelism,
                                         const ConsistencyOptions& opts = {});

std::string consistency_json(const ConsistencyReport& r, const std::string& timestamp);

/// CSV `subject_id,variant,pbvc_forward_order,pbvc_reverse_order` of the
/// pairs that completed in both directions, at full precision.
std::string pbvc_table_csv(const ConsistencyReport& r);

// Clinical correlation.

struct PbvcTableRow {
  std::string subject_id;
  std::string variant;
  double pbvc_forward_order = 0.0;
  double pbvc_reverse_order = 0.0;
};

std::vector<PbvcTableRow> parse_pbvc_table(std::string_view csv);
std::vector<PbvcTableRow> read_pbvc_table(const std::filesystem::path& path);

/// CSV `subject_id,measure,value_t0,value_t1`.
std::vector<ClinicalRecord> parse_clinical(std::string_view csv);
std::vector<ClinicalRecord> read_clinical(const std::filesystem::path& path);

struct CorrelationOptions {
  std::string baseline = "VANILLA-ANALOG";
  double alpha = 0.01;
  /// Bonferroni multiplier; 0 means the number of non-baseline variants.
  int bonferroni_m = 0;
  std::size_t min_subjects = 10;
};

struct CorrelationCell {
  std::string variant;
  Measure measure = Measure::MMSE;
  std::size_t n = 0;
  double r = 0.0;
  Interval ci;
};

struct SteigerCell {
  std::string variant;
  Measure measure = Measure::MMSE;
  std::size_t n = 0;
  double r_variant = 0.0;
  double r_baseline = 0.0;
  double r12 = 0.0;  // corr(variant PBVC, baseline PBVC)
  double z = 0.0;
  double p_raw = 1.0;
  double p_bonferroni = 1.0;
  bool significant = false;  // p_bonferroni < alpha
};

struct CorrelationReport {
  std::string baseline;
  double alpha = 0.01;
  int bonferroni_m = 1;
  std::vector<std::string> variants;  // first-appearance order
  std::vector<Measure> measures;      // enum order
  std::vector<CorrelationCell> correlations;  // by measure, then variant
  std::vector<SteigerCell> comparisons;       // by measure, then non-baseline variant
};

/// Per measure, subjects are joined across the clinical records and the PBVC
/// rows of every variant; the forward-order PBVC is correlated with the
/// progression index. Throws when the baseline is absent, a join leaves
/// fewer than min_subjects, or rows are duplicated.
CorrelationReport correlation_experiment(const std::vector<PbvcTableRow>& pbvc,
                                         const std::vector<ClinicalRecord>& clinical,
                                         const CorrelationOptions& opts = {});

/// "r [lo, hi]" with three decimals, e.g. "-0.226 [-0.284, -0.167]".
std::string format_r_ci(double r, const Interval& ci);

/// Rounded text table: measure, variant, r [CI], Z, p.
std::string correlation_table_text(const CorrelationReport& r);
std::string correlation_json(const CorrelationReport& r, const std::string& timestamp);

// Timing benchmark.

struct BenchmarkOptions {
  std::size_t n_subjects = 30;
  std::uint64_t seed = 0;
  RunOptions run;
};

struct BenchmarkSummary {
  std::uint64_t seed = 0;
  std::vector<std::string> subjects;  // sampled, in draw order
  RunReport report;
};

/// k distinct indices from [0, n) by a partial Fisher-Yates shuffle driven
/// by std::mt19937_64, with unbiased bounded draws.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

BenchmarkSummary benchmark(const SubjectManifest& manifest, const std::vector<PipelineConfig>& cfgs,
                           int parallelism, const BenchmarkOptions& opts = {});

/// Variant, n, mean (s), SD (s).
std::string benchmark_table_text(const BenchmarkSummary& b);
std::string benchmark_json(const BenchmarkSummary& b, const std::string& timestamp);

}  // namespace atrophy
