// One PASS/FAIL line per acceptance criterion; exit status 1 on any FAIL.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "atrophy/extract/extract.hpp"
#include "atrophy/harness/cohort.hpp"
#include "atrophy/harness/experiments.hpp"
#include "atrophy/harness/runner.hpp"
#include "atrophy/pbvc/pipeline.hpp"
#include "atrophy/phantom/phantom.hpp"
#include "atrophy/register/register.hpp"
#include "atrophy/segment/segment.hpp"
#include "atrophy/stats/stats.hpp"

using namespace atrophy;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;
std::vector<int> g_only;  // criteria selected on the command line; empty runs all

void run(int id, const char* name, const std::function<Outcome()>& body) {
  if (!g_only.empty() && std::find(g_only.begin(), g_only.end(), id) == g_only.end()) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s criterion %d: %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), dt);
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

std::vector<double> normals(std::mt19937_64& eng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double u1 = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    x = std::sqrt(-2 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  return v;
}

// Independent references in extended precision.
long double ref_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / x.size(), my = sy / y.size();
  long double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  return cxy / std::sqrt(cxx * cyy);
}

long double ref_steiger(long double r1, long double r2, long double r12, long double n) {
  const long double q = 0.25L * (r1 + r2) * (r1 + r2);
  const long double cov = (r12 * (1 - 2 * q) - 0.5L * q * (1 - 2 * q - r12 * r12)) / ((1 - q) * (1 - q));
  const long double z1 = 0.5L * std::log((1 + r1) / (1 - r1));
  const long double z2 = 0.5L * std::log((1 + r2) / (1 - r2));
  return (z1 - z2) * std::sqrt((n - 3) / (2 - 2 * cov));
}

Outcome fisher() {
  const Interval a = fisher_ci(-0.226, 1006);
  const Interval b = fisher_ci(-0.608, 985);
  const bool ok = round3(a.lo) == -0.284 && round3(a.hi) == -0.167 && round3(b.lo) == -0.646 &&
                  round3(b.hi) == -0.567;
  return {ok, fmt("[%.3f, %.3f] and [%.3f, %.3f]", a.lo, a.hi, b.lo, b.hi)};
}

Outcome improvements() {
  const double in[5][2] = {{0.379, 0.067}, {0.379, 0.046}, {0.379, 0.307}, {0.246, 0.111}, {0.246, 0.002}};
  const double want[5] = {82.4, 87.8, 18.9, 54.8, 99.1};
  double worst = 0.0;
  std::string d;
  for (int i = 0; i < 5; ++i) {
    const double v = relative_improvement(in[i][0], in[i][1]);
    worst = std::max(worst, std::abs(v - want[i]));
    d += fmt("%.1f ", v);
  }
  return {worst <= 0.5, d + fmt("max deviation %.2f pp", worst)};
}

// Pair with a 2 mm / 0.02 rad rigid offset split evenly between the scans.
struct PhantomPair {
  ScanInput a, b;
  double truth = 0.0;
};

PhantomPair phantom_pair(double s) {
  const PhantomSpec spec;
  const AtrophyPair pair = apply_atrophy(spec, s);
  const Vec3 rot = Vec3(0.02, -0.01, 0.015).normalized() * 0.02;
  const Vec3 shift = Vec3(2, -1, 1).normalized() * 2.0;
  const Affine4 rig = rigid_transform(rot, shift, spec.center());
  const Affine4 h = sqrt_affine(rig);
  const double sigma = 0.02 * spec.intensities.wm;
  const std::uint64_t seed = static_cast<std::uint64_t>(std::lround(s * 1000.0)) * 2;
  return {ScanInput{apply_acquisition(pair.t0.image, sigma, 0.0, h.inverse(), seed + 1)},
          ScanInput{apply_acquisition(pair.t1.image, sigma, 0.0, h, seed + 2)}, pair.truth.pbvc_true_percent};
}

struct PhantomRuns {
  std::vector<double> scale, truth, forward, reverse;
};

const PhantomRuns& phantom_runs() {
  static const PhantomRuns runs = [] {
    PhantomRuns r;
    const PipelineConfig cfg;
    for (double s : {0.98, 0.99, 1.0, 1.01}) {
      const PhantomPair p = phantom_pair(s);
      r.scale.push_back(s);
      r.truth.push_back(p.truth);
      r.forward.push_back(pbvc_symmetric(p.a, p.b, cfg).result.final_percent);
      r.reverse.push_back(pbvc_symmetric(p.b, p.a, cfg).result.final_percent);
    }
    return r;
  }();
  return runs;
}

Outcome recovery() {
  const PhantomRuns& r = phantom_runs();
  double worst = 0.0;
  bool monotone = true;
  std::string d;
  for (std::size_t i = 0; i < r.scale.size(); ++i) {
    worst = std::max(worst, std::abs(r.forward[i] - r.truth[i]));
    if (i > 0 && !(r.forward[i] > r.forward[i - 1])) monotone = false;
    d += fmt("s=%.2f: %.3f vs %.3f; ", r.scale[i], r.forward[i], r.truth[i]);
  }
  return {worst <= 0.5 && monotone, d + fmt("max error %.3f pp", worst) + (monotone ? ", monotone" : ", NOT monotone")};
}

Outcome antisymmetry() {
  const PhantomRuns& r = phantom_runs();
  std::vector<double> res;
  for (std::size_t i = 0; i < r.scale.size(); ++i) res.push_back(scan_order_residual(r.forward[i], r.reverse[i]));
  const double worst = *std::max_element(res.begin(), res.end());
  const double m = mfrr(res).mean;
  return {worst <= 0.05 && m <= 0.03, fmt("max residual %.2e pp, MFRR %.2e pp", worst, m)};
}

Outcome stats_oracle() {
  std::mt19937_64 eng(2024);
  double pe = 0.0, me = 0.0, se = 0.0;
  bool exact = true;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20 + eng() % 481;
    const auto d = normals(eng, n);
    auto x1 = normals(eng, n);
    auto x2 = normals(eng, n);
    const double w1 = 0.1 + 0.9 * static_cast<double>(eng() % 1000) / 1000.0;
    const double w2 = 0.1 + 0.9 * static_cast<double>(eng() % 1000) / 1000.0;
    for (std::size_t i = 0; i < n; ++i) {
      x1[i] = -w1 * d[i] + x1[i];
      x2[i] = -w2 * d[i] + 0.5 * x1[i] + x2[i];
    }
    const double r1 = pearson(d, x1), r2 = pearson(d, x2), r12 = pearson(x1, x2);
    pe = std::max({pe, std::abs(r1 - static_cast<double>(ref_pearson(d, x1))),
                   std::abs(r12 - static_cast<double>(ref_pearson(x1, x2)))});
    const double z = steiger_z(r1, r2, r12, n).z;
    se = std::max(se, std::abs(z - static_cast<double>(ref_steiger(r1, r2, r12, n))));
    exact = exact && steiger_z(r2, r1, r12, n).z == -z && steiger_z(r1, r1, r12, n).z == 0.0;

    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) res[i] = std::abs(d[i]);
    const MeanSd m = mfrr(res);
    long double sum = 0, ss = 0;
    for (double v : res) sum += v;
    const long double mean = sum / n;
    for (double v : res) ss += (v - mean) * (v - mean);
    me = std::max({me, std::abs(m.mean - static_cast<double>(mean)),
                   std::abs(m.sd - static_cast<double>(std::sqrt(ss / (n - 1))))});
  }
  const bool ok = pe <= 1e-8 && me <= 1e-8 && se <= 1e-8 && exact;
  return {ok, fmt("pearson %.1e, mfrr %.1e, steiger %.1e", pe, me, se) +
                  (exact ? ", equal/swap exact" : ", equal/swap NOT exact")};
}

PhantomSpec head_spec(double k) {
  PhantomSpec s;
  s.brain_radius_mm *= k;
  s.skull_inner_offset_mm *= k;
  s.skull_thickness_mm *= k;
  s.scalp_thickness_mm *= k;
  return s;
}

Outcome registration() {
  const PhantomSpec fixed_spec = head_spec(1.0);
  const Phantom f = make_head_phantom(fixed_spec);
  const BinaryMask fs = derive_skull_mask(f.image, f.brain_mask).mask;
  const RegistrationInput fixed{&f.image, &f.brain_mask, &fs};
  const Vec3 c = fixed_spec.center();
  const double k = 0.99;
  const Affine4 scale = Affine4::translation(c) * Affine4::from_parts(Mat3::Identity() * k, Vec3::Zero()) *
                        Affine4::translation(-c);
  const std::vector<std::pair<Vec3, Vec3>> poses{{{0.05, 0, 0}, {5, 0, 0}},
                                                 {{0, -0.05, 0}, {0, 5, 0}},
                                                 {{0, 0, 0.05}, {0, 0, -5}},
                                                 {{0.03, -0.03, 0.02}, {2.8, -2.8, 2.9}},
                                                 {{0, 0, 0}, {0, 0, 0}}};
  double et = 0.0, er = 0.0, es = 0.0;
  for (const auto& [rot, shift] : poses) {
    const Affine4 pose = rigid_transform(rot, shift, c);
    const Phantom m = make_head_phantom(head_spec(k), 1.0, pose);
    const BinaryMask ms = derive_skull_mask(m.image, m.brain_mask).mask;
    const RegistrationResult r = register_affine(fixed, {&m.image, &m.brain_mask, &ms});
    const Affine4 truth = pose * scale;
    const AffineParams e = AffineParams::from_matrix(truth.inverse() * r.forward, f.brain_mask.centroid());
    et = std::max(et, e.t.cwiseAbs().maxCoeff());
    er = std::max(er, e.r.cwiseAbs().maxCoeff());
    es = std::max(es, (e.s.array().exp() - 1.0).abs().maxCoeff());
  }

  std::mt19937_64 eng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double sq = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Mat3 a = Mat3::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) += 0.1 * u(eng);
    const Affine4 tr = Affine4::from_parts(a, Vec3(5 * u(eng), 5 * u(eng), 5 * u(eng)));
    const Affine4 h = sqrt_affine(tr);
    sq = std::max(sq, ((h * h).matrix() - tr.matrix()).cwiseAbs().maxCoeff());
  }
  const bool ok = et <= 0.2 && er <= 0.005 && es <= 0.002 && sq < 1e-9;
  return {ok, fmt("translation %.4f mm, rotation %.5f rad, scale %.5f; sqrt residual %.1e", et, er, es, sq)};
}

Outcome skull() {
  PhantomSpec spec;
  spec.dims = {96, 96, 96};
  spec.spacing = Vec3(2, 2, 2);
  const double h = spec.spacing[0];
  double worst = 1.0;
  std::size_t total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    NormalSource n(seed);
    const Affine4 pose =
        rigid_transform(Vec3(n.next(), n.next(), n.next()) * 0.02, Vec3(n.next(), n.next(), n.next()) * 2.0,
                        spec.center());
    const Phantom p = make_head_phantom(spec, 1.0, pose);
    const Volume img = apply_acquisition(p.image, 0.02 * spec.intensities.wm, 0.0, Affine4::identity(), seed);
    const BinaryMask brain = threshold_brain_extract(img);
    const SkullResult r = derive_skull_mask(img, brain);
    const Affine4 inv = pose.inverse();
    std::size_t near = 0;
    for (const Vec3& q : r.points) {
      bool hit = false;
      for (int dz = -1; dz <= 1 && !hit; ++dz)
        for (int dy = -1; dy <= 1 && !hit; ++dy)
          for (int dx = -1; dx <= 1 && !hit; ++dx)
            hit = classify_point(spec, inv.apply(q + h * Vec3(dx, dy, dz))) == HeadClass::Skull;
      near += hit ? 1 : 0;
    }
    total += r.points.size();
    worst = std::min(worst, r.points.empty() ? 0.0 : static_cast<double>(near) / r.points.size());
  }
  const std::vector<double> o = ray_offsets();
  bool ladder = o.size() == 61;
  for (std::size_t i = 0; ladder && i < o.size(); ++i) ladder = o[i] == 0.5 * static_cast<double>(i);
  return {worst >= 0.95 && ladder, fmt("worst in-shell fraction %.4f over %.0f points", worst, total) +
                                       (ladder ? ", 61-sample ladder" : ", ladder WRONG")};
}

Outcome labels() {
  const std::vector<std::pair<std::string, Tissue>> table{
      {"Lateral-Ventricle", kCSF},       {"Inf-Lat-Vent", kCSF},           {"3rd-Ventricle", kCSF},
      {"4th-Ventricle", kCSF},           {"CSF", kCSF},                    {"Cerebral-Cortex", kGM},
      {"Thalamus", kGM},                 {"Caudate", kGM},                 {"Putamen", kGM},
      {"Pallidum", kGM},                 {"Hippocampus", kGM},             {"Amygdala", kGM},
      {"Cerebellum-Cortex", kGM},        {"Accumbens-area", kGM},          {"VentralDC", kGM},
      {"Cerebral-White-Matter", kWM},    {"Cerebellum-White-Matter", kWM}, {"Brain-Stem", kWM}};
  AnatomicalLabelMap m;
  std::vector<std::uint8_t> want;
  std::int32_t code = 1;
  for (const auto& [name, tissue] : table) {
    for (const char* side : {"Left-", "Right-", ""}) {
      m.code_names[code] = side + name;
      m.labels.push_back(code++);
      want.push_back(tissue);
    }
  }
  m.code_names[code] = "Left-vessel";
  m.labels.push_back(code);
  want.push_back(kBG);
  m.labels.push_back(999);
  want.push_back(kBG);
  m.labels.push_back(0);
  want.push_back(kBG);
  // Grids need two voxels per axis: tile the row four times.
  const std::size_t row = m.labels.size();
  for (int t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < row; ++i) {
      m.labels.push_back(m.labels[i]);
      want.push_back(want[i]);
    }
  }
  m.grid = Grid({static_cast<int>(row), 2, 2}, Vec3(1, 1, 1));
  const AggregationResult r = aggregate_labels(m);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < want.size(); ++i) wrong += r.seg[i] == want[i] ? 0 : 1;
  const bool unmapped = r.unmapped_codes == std::vector<std::int32_t>{code, 999};
  return {wrong == 0 && unmapped, fmt("%.0f labels, %.0f mismatches", static_cast<double>(want.size()),
                                      static_cast<double>(wrong)) +
                                      (unmapped ? ", unmapped reported" : ", unmapped report WRONG")};
}

std::string stripped_report(const RunReport& r) {
  Json j = Json::parse(report_json(r, "fixed"));
  for (auto& row : j["results"]) row.erase("timings");
  j["aggregates"].erase("timing");
  return j.dump();
}

Outcome determinism() {
  CohortOptions o;
  o.spec.dims = {96, 96, 96};
  o.spec.spacing = Vec3(2, 2, 2);
  o.n_subjects = 3;
  o.seed = 5;
  const fs::path dir = fs::temp_directory_path() / "atrophy_acceptance" / "determinism";
  const SubjectManifest m = generate_cohort(dir, o);
  std::vector<PipelineConfig> cfgs(4);
  const Variant vs[4] = {Variant::Vanilla, Variant::SS, Variant::SEG, Variant::SSSEG};
  for (int i = 0; i < 4; ++i) cfgs[i].variant = vs[i];
  RunOptions ro;
  ro.codebook = dir / "codebook.csv";
  clear_calibration_cache();
  const RunReport a = run_batch(m, cfgs, 1, ro);
  clear_calibration_cache();
  const RunReport b = run_batch(m, cfgs, 4, ro);
  clear_calibration_cache();
  const RunReport c = run_batch(m, cfgs, 1, ro);
  const std::string ja = stripped_report(a), jb = stripped_report(b), jc = stripped_report(c);
  const bool ok = a.results.size() == 12 && a.failures.empty() && ja == jb && ja == jc;
  return {ok, fmt("%.0f results, %.0f failures, ", static_cast<double>(a.results.size()),
                  static_cast<double>(a.failures.size())) +
                  (ja == jb && ja == jc ? "reports identical" : "reports DIFFER")};
}

Outcome construct_validity() {
  std::mt19937_64 eng(7);
  const std::size_t n = 300;
  const auto delta = normals(eng, n);
  const auto e1 = normals(eng, n);
  const auto e2 = normals(eng, n);
  double mean = 0.0, ss = 0.0;
  for (double d : delta) mean += d / n;
  for (double d : delta) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (n - 1));
  std::vector<ClinicalRecord> clin;
  std::vector<PbvcTableRow> pbvc;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "s" + std::to_string(i);
    clin.push_back({id, Measure::CDRSB, 1.0, 1.0 + delta[i]});
    pbvc.push_back({id, "VANILLA-ANALOG", e2[i], 0.0});
    pbvc.push_back({id, "SS-SEG-ANALOG", -delta[i] + 0.1 * sd * e1[i], 0.0});
  }
  const CorrelationReport r = correlation_experiment(pbvc, clin);
  if (r.comparisons.size() != 1) return {false, "expected one comparison"};
  const SteigerCell& c = r.comparisons[0];
  const bool ok = c.significant && c.p_bonferroni < 0.01 && c.z < 0.0;
  return {ok, fmt("r %.3f vs %.3f, Z %.2f, corrected p %.1e", c.r_variant, c.r_baseline, c.z, c.p_bonferroni)};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_only.push_back(std::atoi(argv[i]));
  run(1, "Fisher CI reproduction", fisher);
  run(2, "relative improvement reproduction", improvements);
  run(3, "phantom ground-truth recovery", recovery);
  run(4, "scan-order antisymmetry", antisymmetry);
  run(5, "statistical oracle equivalence", stats_oracle);
  run(6, "registration recovery", registration);
  run(7, "skull-mask derivation", skull);
  run(8, "label-aggregation totality", labels);
  run(9, "batch determinism", determinism);
  run(10, "correlation construct validity", construct_validity);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
