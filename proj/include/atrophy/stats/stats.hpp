#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace atrophy {

enum class Measure { MMSE, MoCA, GM_VOLUME, BPF, MSEADLG, ADAS13, CDRSB, FAQ };

std::string_view measure_name(Measure m);
/// Case-insensitive; also accepts the hyphenated forms ADAS-13 and CDR-SB.
Measure parse_measure(std::string_view s);
/// True for measures where a decrease indicates worsening.
bool decrease_is_worsening(Measure m);

struct ClinicalRecord {
  std::string subject_id;
  Measure measure = Measure::MMSE;
  double v_t0 = 0.0;
  double v_t1 = 0.0;
};

struct ProgressionIndex {
  std::string subject_id;
  Measure measure = Measure::MMSE;
  double delta = 0.0;  // > 0 means clinical worsening
};

ProgressionIndex progression_index(const ClinicalRecord& rec);

/// Sample Pearson correlation; requires n >= 3 and non-constant series.
double pearson(std::span<const double> x, std::span<const double> y);

inline constexpr double kZ975 = 1.959964;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Fisher r-to-z interval. alpha = 0.05 uses the fixed constant kZ975.
Interval fisher_ci(double r, std::size_t n, double alpha = 0.05);

/// Upper standard normal quantile z with P(Z > z) = p.
double normal_upper_quantile(double p);
/// Two-sided p value of a standard normal statistic.
double normal_two_sided_p(double z);

struct SteigerResult {
  double z = 0.0;
  double p = 1.0;
};

/// Dependent correlations sharing one variable: r1 = corr(d, x1),
/// r2 = corr(d, x2), r12 = corr(x1, x2). r1 == r2 gives Z = 0, p = 1 for
/// any r12, including 1.
SteigerResult steiger_z(double r1, double r2, double r12, std::size_t n);

double bonferroni(double p, int m);

double scan_order_residual(double pbvc_ab, double pbvc_ba);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample SD, 0 for a single value
};

MeanSd mfrr(std::span<const double> residuals);

double relative_improvement(double mfrr_baseline, double mfrr_pipe);

}  // namespace atrophy
