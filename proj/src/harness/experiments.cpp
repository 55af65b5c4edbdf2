#include "atrophy/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "atrophy/error.hpp"
#include "atrophy/util/csv.hpp"
#include "report_json.hpp"

namespace atrophy {

using report::Json;
using report::num;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double parse_number(const std::string& s, const char* what, std::size_t row) {
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
    throw Error(std::string(what) + " on row " + std::to_string(row + 2) + " is not a finite number: '" +
                s + "'");
  }
  return d;
}

int required_column(const CsvTable& t, const char* name, const char* file) {
  const int c = t.column(name);
  if (c < 0) throw Error(std::string(file) + ": missing column " + name);
  return c;
}

bool same_variant(const std::string& a, const std::string& b) {
  try {
    return parse_variant(a) == parse_variant(b);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

// Scan-order consistency.

ConsistencyReport consistency_experiment(const SubjectManifest& manifest,
                                         const std::vector<PipelineConfig>& cfgs, int parallelism,
                                         const ConsistencyOptions& opts) {
  const bool has_baseline = std::any_of(cfgs.begin(), cfgs.end(),
                                        [&](const PipelineConfig& c) { return c.variant == opts.baseline; });
  if (!has_baseline) {
    throw Error("consistency: baseline variant " + std::string(variant_name(opts.baseline)) +
                " is not among the configured variants");
  }
  ConsistencyReport rep;
  rep.baseline = opts.baseline;
  rep.injected_bias_pp = opts.inject_forward_bias_pp;
  RunOptions fwd = opts.run, rev = opts.run;
  fwd.reversed = false;
  rev.reversed = true;
  rep.forward = run_batch(manifest, cfgs, parallelism, fwd);
  rep.reverse = run_batch(manifest, cfgs, parallelism, rev);

  auto find = [](const RunReport& r, const std::string& id, Variant v) -> const ResultRow* {
    for (const auto& row : r.results) {
      if (row.subject_id == id && row.variant == v) return &row;
    }
    return nullptr;
  };
  for (const auto& cfg : cfgs) {
    VariantConsistency vc;
    vc.variant = cfg.variant;
    std::vector<double> residuals;
    for (const auto& subject : manifest.rows) {
      const ResultRow* a = find(rep.forward, subject.subject_id, cfg.variant);
      const ResultRow* b = find(rep.reverse, subject.subject_id, cfg.variant);
      if (a == nullptr || b == nullptr) {
        ++vc.excluded;
        continue;
      }
      ConsistencyPair p;
      p.subject_id = subject.subject_id;
      p.pbvc_forward_order = a->run.result.final_percent + opts.inject_forward_bias_pp;
      p.pbvc_reverse_order = b->run.result.final_percent;
      p.residual = scan_order_residual(p.pbvc_forward_order, p.pbvc_reverse_order);
      residuals.push_back(p.residual);
      vc.pairs.push_back(p);
    }
    if (!residuals.empty()) vc.mfrr = mfrr(residuals);
    rep.variants.push_back(std::move(vc));
  }
  const auto base = std::find_if(rep.variants.begin(), rep.variants.end(),
                                 [&](const VariantConsistency& v) { return v.variant == opts.baseline; });
  const bool base_ok = !base->pairs.empty() && base->mfrr.mean > 0.0;
  for (auto& v : rep.variants) {
    if (v.variant != opts.baseline && base_ok && !v.pairs.empty()) {
      v.relative_improvement = relative_improvement(base->mfrr.mean, v.mfrr.mean);
    }
  }
  return rep;
}

std::string consistency_json(const ConsistencyReport& r, const std::string& timestamp) {
  Json results = Json::array();
  for (const auto& v : r.variants) {
    for (const auto& p : v.pairs) {
      Json j;
      j["subject_id"] = p.subject_id;
      j["variant"] = variant_name(v.variant);
      j["pbvc_forward_order"] = num(p.pbvc_forward_order);
      j["pbvc_reverse_order"] = num(p.pbvc_reverse_order);
      j["residual"] = num(p.residual);
      results.push_back(j);
    }
  }
  Json failures = Json::array();
  for (const auto* run : {&r.forward, &r.reverse}) {
    for (const auto& f : report::failures(run->failures)) {
      Json j = f;
      j["order"] = run == &r.forward ? "forward" : "reverse";
      failures.push_back(j);
    }
  }
  Json per = Json::array();
  for (const auto& v : r.variants) {
    Json j;
    j["variant"] = variant_name(v.variant);
    j["n_pairs"] = v.pairs.size();
    j["excluded"] = v.excluded;
    j["mfrr"] = v.pairs.empty() ? Json(nullptr) : num(v.mfrr.mean);
    j["sd"] = v.pairs.empty() ? Json(nullptr) : num(v.mfrr.sd);
    if (v.relative_improvement) j["relative_improvement_percent"] = num(*v.relative_improvement);
    per.push_back(j);
  }
  Json agg;
  agg["baseline"] = variant_name(r.baseline);
  agg["injected_forward_bias_pp"] = num(r.injected_bias_pp);
  agg["variants"] = per;
  agg["timing_forward"] = report::timing(r.forward.timing);
  agg["timing_reverse"] = report::timing(r.reverse.timing);
  Json doc;
  doc["meta"] = report::meta(r.forward.configs, r.forward.seed, timestamp);
  doc["results"] = results;
  doc["failures"] = failures;
  doc["aggregates"] = agg;
  return doc.dump(2) + "\n";
}

std::string pbvc_table_csv(const ConsistencyReport& r) {
  std::string out = "subject_id,variant,pbvc_forward_order,pbvc_reverse_order\n";
  char buf[128];
  for (const auto& v : r.variants) {
    for (const auto& p : v.pairs) {
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", p.pbvc_forward_order, p.pbvc_reverse_order);
      out += csv_escape(p.subject_id) + "," + std::string(variant_name(v.variant)) + buf;
    }
  }
  return out;
}

// Clinical correlation.

std::vector<PbvcTableRow> parse_pbvc_table(std::string_view csv) {
  const CsvTable t = parse_csv(csv);
  const int c_id = required_column(t, "subject_id", "PBVC table");
  const int c_v = required_column(t, "variant", "PBVC table");
  const int c_f = required_column(t, "pbvc_forward_order", "PBVC table");
  const int c_r = required_column(t, "pbvc_reverse_order", "PBVC table");
  std::vector<PbvcTableRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) {
      throw Error("PBVC table: row " + std::to_string(i + 2) + " has the wrong field count");
    }
    PbvcTableRow r;
    r.subject_id = row[static_cast<std::size_t>(c_id)];
    r.variant = row[static_cast<std::size_t>(c_v)];
    r.pbvc_forward_order = parse_number(row[static_cast<std::size_t>(c_f)], "pbvc_forward_order", i);
    r.pbvc_reverse_order = parse_number(row[static_cast<std::size_t>(c_r)], "pbvc_reverse_order", i);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PbvcTableRow> read_pbvc_table(const std::filesystem::path& path) {
  return parse_pbvc_table(slurp(path));
}

std::vector<ClinicalRecord> parse_clinical(std::string_view csv) {
  const CsvTable t = parse_csv(csv);
  const int c_id = required_column(t, "subject_id", "clinical table");
  const int c_m = required_column(t, "measure", "clinical table");
  const int c_0 = required_column(t, "value_t0", "clinical table");
  const int c_1 = required_column(t, "value_t1", "clinical table");
  std::vector<ClinicalRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) {
      throw Error("clinical table: row " + std::to_string(i + 2) + " has the wrong field count");
    }
    ClinicalRecord r;
    r.subject_id = row[static_cast<std::size_t>(c_id)];
    r.measure = parse_measure(row[static_cast<std::size_t>(c_m)]);
    r.v_t0 = parse_number(row[static_cast<std::size_t>(c_0)], "value_t0", i);
    r.v_t1 = parse_number(row[static_cast<std::size_t>(c_1)], "value_t1", i);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ClinicalRecord> read_clinical(const std::filesystem::path& path) {
  return parse_clinical(slurp(path));
}

CorrelationReport correlation_experiment(const std::vector<PbvcTableRow>& pbvc,
                                         const std::vector<ClinicalRecord>& clinical,
                                         const CorrelationOptions& opts) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw Error("correlation: alpha must lie in (0, 1)");
  CorrelationReport rep;
  rep.alpha = opts.alpha;

  // variant -> subject -> PBVC (forward order)
  std::map<std::string, std::map<std::string, double>> table;
  for (const auto& row : pbvc) {
    if (table.find(row.variant) == table.end()) rep.variants.push_back(row.variant);
    if (!table[row.variant].emplace(row.subject_id, row.pbvc_forward_order).second) {
      throw Error("correlation: duplicate PBVC row for subject " + row.subject_id + ", variant " +
                  row.variant);
    }
  }
  // The baseline may be given in either variant spelling.
  rep.baseline = opts.baseline;
  if (table.find(rep.baseline) == table.end()) {
    for (const auto& v : rep.variants) {
      if (same_variant(v, opts.baseline)) rep.baseline = v;
    }
  }
  if (table.find(rep.baseline) == table.end()) {
    throw Error("correlation: baseline variant " + opts.baseline + " is absent from the PBVC table");
  }
  const int non_baseline = static_cast<int>(rep.variants.size()) - 1;
  rep.bonferroni_m = opts.bonferroni_m > 0 ? opts.bonferroni_m : std::max(1, non_baseline);

  std::map<Measure, std::map<std::string, double>> deltas;
  for (const auto& rec : clinical) {
    const ProgressionIndex pi = progression_index(rec);
    if (!deltas[rec.measure].emplace(rec.subject_id, pi.delta).second) {
      throw Error("correlation: duplicate clinical row for subject " + rec.subject_id + ", measure " +
                  std::string(measure_name(rec.measure)));
    }
  }
  if (deltas.empty()) throw Error("correlation: no clinical records");

  for (const auto& [measure, by_subject] : deltas) {
    rep.measures.push_back(measure);
    std::vector<std::string> ids;
    for (const auto& [id, d] : by_subject) {
      bool all = true;
      for (const auto& v : rep.variants) all = all && table[v].count(id) > 0;
      if (all) ids.push_back(id);
    }
    if (ids.size() < opts.min_subjects) {
      throw Error("correlation: only " + std::to_string(ids.size()) + " subjects joined for " +
                  std::string(measure_name(measure)) + " (need " +
                  std::to_string(opts.min_subjects) + ")");
    }
    std::vector<double> d;
    for (const auto& id : ids) d.push_back(by_subject.at(id));
    std::map<std::string, std::vector<double>> cols;
    std::map<std::string, double> r;
    for (const auto& v : rep.variants) {
      auto& col = cols[v];
      for (const auto& id : ids) col.push_back(table[v].at(id));
      r[v] = pearson(d, col);
      rep.correlations.push_back({v, measure, ids.size(), r[v], fisher_ci(r[v], ids.size())});
    }
    for (const auto& v : rep.variants) {
      if (v == rep.baseline) continue;
      SteigerCell s;
      s.variant = v;
      s.measure = measure;
      s.n = ids.size();
      s.r_variant = r[v];
      s.r_baseline = r[rep.baseline];
      s.r12 = pearson(cols[v], cols[rep.baseline]);
      const SteigerResult z = steiger_z(s.r_variant, s.r_baseline, s.r12, s.n);
      s.z = z.z;
      s.p_raw = z.p;
      s.p_bonferroni = bonferroni(z.p, rep.bonferroni_m);
      s.significant = s.p_bonferroni < opts.alpha;
      rep.comparisons.push_back(s);
    }
  }
  return rep;
}

std::string format_r_ci(double r, const Interval& ci) {
  auto f = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", x);
    // Avoid "-0.000".
    if (std::string(buf) == "-0.000") return std::string("0.000");
    return std::string(buf);
  };
  return f(r) + " [" + f(ci.lo) + ", " + f(ci.hi) + "]";
}

namespace {

std::string format_p(double p) {
  if (p < 0.001) return "p < 0.001";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p = %.3f", p);
  return buf;
}

}  // namespace

std::string correlation_table_text(const CorrelationReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "baseline %s, alpha %.3g, Bonferroni m = %d\n", r.baseline.c_str(),
                r.alpha, r.bonferroni_m);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %-16s %5s  %-26s %-24s\n", "measure", "variant", "n",
                "r [95% CI]", "Z (corrected p)");
  out += buf;
  for (const auto& c : r.correlations) {
    std::string zcol = "-";
    for (const auto& s : r.comparisons) {
      if (s.measure == c.measure && s.variant == c.variant) {
        char z[96];
        std::snprintf(z, sizeof(z), "%.2f (%s)%s", s.z, format_p(s.p_bonferroni).c_str(),
                      s.significant ? " *" : "");
        zcol = z;
      }
    }
    std::snprintf(buf, sizeof(buf), "%-10s %-16s %5zu  %-26s %-24s\n",
                  std::string(measure_name(c.measure)).c_str(), c.variant.c_str(), c.n,
                  format_r_ci(c.r, c.ci).c_str(), zcol.c_str());
    out += buf;
  }
  return out;
}

std::string correlation_json(const CorrelationReport& r, const std::string& timestamp) {
  Json meta;
  meta["version"] = kToolVersion;
  meta["timestamp"] = timestamp;
  meta["baseline"] = r.baseline;
  meta["alpha"] = num(r.alpha);
  meta["bonferroni_m"] = r.bonferroni_m;
  meta["pbvc_column"] = "pbvc_forward_order";
  meta["fisher_z_0975"] = kZ975;
  Json results = Json::array();
  for (const auto& c : r.correlations) {
    Json j;
    j["measure"] = measure_name(c.measure);
    j["variant"] = c.variant;
    j["n"] = c.n;
    j["r"] = num(c.r);
    j["ci_lo"] = num(c.ci.lo);
    j["ci_hi"] = num(c.ci.hi);
    j["text"] = format_r_ci(c.r, c.ci);
    for (const auto& s : r.comparisons) {
      if (s.measure != c.measure || s.variant != c.variant) continue;
      j["r12"] = num(s.r12);
      j["steiger_z"] = num(s.z);
      j["p_raw"] = num(s.p_raw);
      j["p_bonferroni"] = num(s.p_bonferroni);
      j["significant"] = s.significant;
    }
    results.push_back(j);
  }
  Json agg;
  agg["n_variants"] = r.variants.size();
  agg["n_measures"] = r.measures.size();
  std::size_t sig = 0;
  for (const auto& s : r.comparisons) sig += s.significant ? 1 : 0;
  agg["n_significant"] = sig;
  Json doc;
  doc["meta"] = meta;
  doc["results"] = results;
  doc["failures"] = Json::array();
  doc["aggregates"] = agg;
  return doc.dump(2) + "\n";
}

// Timing benchmark.

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) {
    throw Error("benchmark: " + std::to_string(k) + " subjects requested but the manifest has " +
                std::to_string(n));
  }
  std::mt19937_64 eng(seed);
  // Unbiased draw in [0, bound) by rejection; the engine sequence is
  // standardized, unlike std::uniform_int_distribution.
  auto draw = [&](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = eng();
    while (x >= limit) x = eng();
    return x % bound;
  };
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(draw(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

BenchmarkSummary benchmark(const SubjectManifest& manifest, const std::vector<PipelineConfig>& cfgs,
                           int parallelism, const BenchmarkOptions& opts) {
  BenchmarkSummary b;
  b.seed = opts.seed;
  const auto idx = sample_indices(manifest.rows.size(), opts.n_subjects, opts.seed);
  SubjectManifest sub;
  sub.base_dir = manifest.base_dir;
  for (std::size_t i : idx) {
    sub.rows.push_back(manifest.rows[i]);
    b.subjects.push_back(manifest.rows[i].subject_id);
  }
  b.report = run_batch(sub, cfgs, parallelism, opts.run);
  return b;
}

std::string benchmark_table_text(const BenchmarkSummary& b) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %4s %12s %10s\n", "variant", "n", "mean (s)", "SD (s)");
  out += buf;
  for (const auto& t : b.report.timing) {
    std::snprintf(buf, sizeof(buf), "%-16s %4zu %12.2f %10.2f\n",
                  std::string(variant_name(t.variant)).c_str(), t.n, t.mean_seconds, t.sd_seconds);
    out += buf;
  }
  return out;
}

std::string benchmark_json(const BenchmarkSummary& b, const std::string& timestamp) {
  Json doc;
  Json meta = report::meta(b.report.configs, b.report.seed, timestamp);
  meta["sampling_seed"] = b.seed;
  meta["subjects"] = b.subjects;
  doc["meta"] = meta;
  doc["results"] = report::results(b.report.results);
  doc["failures"] = report::failures(b.report.failures);
  Json agg;
  agg["n_results"] = b.report.results.size();
  agg["n_failures"] = b.report.failures.size();
  agg["timing"] = report::timing(b.report.timing);
  doc["aggregates"] = agg;
  return doc.dump(2) + "\n";
}

}  // namespace atrophy
