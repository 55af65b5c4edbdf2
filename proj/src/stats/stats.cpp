#include "atrophy/stats/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "atrophy/error.hpp"

namespace atrophy {

namespace {

struct MeasureEntry {
  Measure m;
  const char* name;
  bool decrease_worse;
};

constexpr MeasureEntry kMeasures[] = {
    {Measure::MMSE, "MMSE", true},       {Measure::MoCA, "MoCA", true},
    {Measure::GM_VOLUME, "GM_VOLUME", true}, {Measure::BPF, "BPF", true},
    {Measure::MSEADLG, "MSEADLG", true}, {Measure::ADAS13, "ADAS13", false},
    {Measure::CDRSB, "CDRSB", false},    {Measure::FAQ, "FAQ", false},
};

std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '-' || c == '_' || c == ' ') continue;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string(what) + " must be finite");
}

}  // namespace

std::string_view measure_name(Measure m) {
  for (const auto& e : kMeasures) {
    if (e.m == m) return e.name;
  }
  throw Error("unknown measure");
}

Measure parse_measure(std::string_view s) {
  const std::string f = fold(s);
  for (const auto& e : kMeasures) {
    if (fold(e.name) == f) return e.m;
  }
  if (f == "GM" || f == "GMVOL") return Measure::GM_VOLUME;
  throw Error("unknown measure '" + std::string(s) + "'");
}

bool decrease_is_worsening(Measure m) {
  for (const auto& e : kMeasures) {
    if (e.m == m) return e.decrease_worse;
  }
  throw Error("unknown measure");
}

ProgressionIndex progression_index(const ClinicalRecord& rec) {
  require_finite(rec.v_t0, "clinical value");
  require_finite(rec.v_t1, "clinical value");
  ProgressionIndex p{rec.subject_id, rec.measure, 0.0};
  p.delta = decrease_is_worsening(rec.measure) ? rec.v_t0 - rec.v_t1 : rec.v_t1 - rec.v_t0;
  return p;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 3) throw Error("pearson: need at least 3 pairs");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require_finite(x[i], "pearson input");
    require_finite(y[i], "pearson input");
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double normal_two_sided_p(double z) {
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

double normal_upper_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile: p must lie in (0, 1)");
  // Bisection on the upper tail 0.5 erfc(z / sqrt 2), which is monotone.
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Interval fisher_ci(double r, std::size_t n, double alpha) {
  if (!(std::abs(r) < 1.0)) throw Error("fisher_ci: |r| must be < 1");
  if (n < 4) throw Error("fisher_ci: n must be >= 4");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("fisher_ci: alpha must lie in (0, 1)");
  const double zc = alpha == 0.05 ? kZ975 : normal_upper_quantile(alpha / 2.0);
  const double z = std::atanh(r);
  const double h = zc / std::sqrt(static_cast<double>(n) - 3.0);
  return {std::tanh(z - h), std::tanh(z + h)};
}

SteigerResult steiger_z(double r1, double r2, double r12, std::size_t n) {
  for (double r : {r1, r2}) {
    if (!(std::abs(r) < 1.0)) throw Error("steiger_z: correlations must satisfy |r| < 1");
  }
  if (n < 10) throw Error("steiger_z: n must be >= 10");
  // The Fisher-z difference vanishes, so Z = 0 whatever the covariance term;
  // this also covers identical variant columns, where r12 = 1.
  if (r1 == r2) return {0.0, 1.0};
  if (!(std::abs(r12) < 1.0)) throw Error("steiger_z: correlations must satisfy |r| < 1");
  const double rm = (r1 + r2) / 2.0;
  const double rm2 = rm * rm;
  const double c = (r12 * (1.0 - 2.0 * rm2) - 0.5 * rm2 * (1.0 - 2.0 * rm2 - r12 * r12)) /
                   ((1.0 - rm2) * (1.0 - rm2));
  if (!(c < 1.0)) throw Error("steiger_z: degenerate covariance term");
  const double z =
      (std::atanh(r1) - std::atanh(r2)) * std::sqrt(static_cast<double>(n) - 3.0) /
      std::sqrt(2.0 - 2.0 * c);
  return {z, normal_two_sided_p(z)};
}

double bonferroni(double p, int m) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("bonferroni: p must lie in [0, 1]");
  if (m < 1) throw Error("bonferroni: m must be >= 1");
  return std::min(1.0, m * p);
}

double scan_order_residual(double pbvc_ab, double pbvc_ba) {
  require_finite(pbvc_ab, "PBVC");
  require_finite(pbvc_ba, "PBVC");
  return std::abs(pbvc_ab + pbvc_ba);
}

MeanSd mfrr(std::span<const double> residuals) {
  if (residuals.empty()) throw Error("mfrr: no residuals");
  // Summing in sorted order makes the result independent of input order.
  std::vector<double> v(residuals.begin(), residuals.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double r : v) {
    require_finite(r, "residual");
    sum += r;
  }
  const auto n = static_cast<double>(residuals.size());
  MeanSd out;
  out.mean = sum / n;
  if (residuals.size() > 1) {
    double ss = 0.0;
    for (double r : v) ss += (r - out.mean) * (r - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

double relative_improvement(double mfrr_baseline, double mfrr_pipe) {
  if (!(mfrr_baseline > 0.0)) throw Error("relative_improvement: baseline MFRR must be positive");
  return 100.0 * (mfrr_baseline - mfrr_pipe) / mfrr_baseline;
}

}  // namespace atrophy
