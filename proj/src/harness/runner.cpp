#include "atrophy/harness/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/util/hash.hpp"
#include "report_json.hpp"

namespace atrophy {

void validate_config(const ManifestRow& pair, const PipelineConfig& cfg, const RunOptions& opts) {
  const std::string v(variant_name(cfg.variant));
  if (extractor_of(cfg.variant) == Extractor::External && (!pair.mask_t0 || !pair.mask_t1)) {
    throw Error("variant " + v + " requires mask_t0 and mask_t1 for subject " + pair.subject_id);
  }
  if (segmenter_of(cfg.variant) == Segmenter::External) {
    if (!pair.labelmap_t0 || !pair.labelmap_t1) {
      throw Error("variant " + v + " requires labelmap_t0 and labelmap_t1 for subject " +
                  pair.subject_id);
    }
    if (!opts.codebook) throw Error("variant " + v + " requires a label codebook");
  }
  if (cfg.calibrate && !(cfg.s_cal >= 0.98 && cfg.s_cal < 1.0)) {
    throw Error("calibration scale must lie in [0.98, 1)");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

ScanInput load_scan(const std::filesystem::path& image,
                    const std::optional<std::filesystem::path>& mask,
                    const std::optional<std::filesystem::path>& labels, const PipelineConfig& cfg,
                    const RunOptions& opts) {
  ScanInput s;
  s.image = load_volume(image);
  if (extractor_of(cfg.variant) == Extractor::External) {
    ExternalMask m = load_external_mask(*mask, s.image.grid());
    s.mask = std::move(m.mask);
    s.mask_discarded_fraction = m.discarded_fraction;
  }
  if (segmenter_of(cfg.variant) == Segmenter::External) {
    s.labels = load_external_labelmap(*labels, *opts.codebook);
  }
  return s;
}

}  // namespace

PipelineRun run_pipeline(const ManifestRow& pair, const PipelineConfig& cfg, const RunOptions& opts) {
  validate_config(pair, cfg, opts);
  const auto t0 = Clock::now();
  ScanInput a, b;
  try {
    if (!opts.reversed) {
      a = load_scan(pair.t0, pair.mask_t0, pair.labelmap_t0, cfg, opts);
      b = load_scan(pair.t1, pair.mask_t1, pair.labelmap_t1, cfg, opts);
    } else {
      a = load_scan(pair.t1, pair.mask_t1, pair.labelmap_t1, cfg, opts);
      b = load_scan(pair.t0, pair.mask_t0, pair.labelmap_t0, cfg, opts);
    }
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
  const double load_s = std::max(std::chrono::duration<double>(Clock::now() - t0).count(), 1e-9);
  PipelineRun run = pbvc_symmetric(a, b, cfg, opts.keep_edges);
  run.timings.insert(run.timings.begin(), StageTiming{"load", load_s});
  return run;
}

std::uint64_t run_config_hash(const std::vector<PipelineConfig>& cfgs) {
  Fnv1a h;
  for (const auto& c : cfgs) h.update(canonical_config_text(c));
  return h.digest();
}

void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& f) {
  if (parallelism < 1) throw Error("parallelism must be >= 1");
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

RunReport run_batch(const SubjectManifest& manifest, const std::vector<PipelineConfig>& cfgs,
                    int parallelism, const RunOptions& opts) {
  if (cfgs.empty()) throw Error("run_batch: no pipeline configs");
  std::set<Variant> variants;
  for (const auto& c : cfgs) {
    if (!variants.insert(c.variant).second) {
      throw Error("run_batch: variant " + std::string(variant_name(c.variant)) + " listed twice");
    }
  }
  RunReport rep;
  rep.configs = cfgs;
  rep.seed = cfgs.front().seed;

  struct Cell {
    std::optional<ResultRow> ok;
    std::optional<FailureRow> fail;
  };
  const std::size_t nc = cfgs.size();
  std::vector<Cell> cells(manifest.rows.size() * nc);
  parallel_for(cells.size(), parallelism, [&](std::size_t i) {
    const ManifestRow& row = manifest.rows[i / nc];
    const PipelineConfig& cfg = cfgs[i % nc];
    FailureRow f{row.subject_id, cfg.variant, config_hash(cfg), "", ""};
    try {
      validate_config(row, cfg, opts);
    } catch (const std::exception& e) {
      f.stage = "config";
      f.message = e.what();
      cells[i].fail = f;
      return;
    }
    if (const auto missing = first_missing_file(row)) {
      f.stage = "input";
      f.message = "missing file " + missing->string();
      cells[i].fail = f;
      return;
    }
    try {
      cells[i].ok = ResultRow{row.subject_id, cfg.variant, f.config_hash, run_pipeline(row, cfg, opts)};
    } catch (const StageError& e) {
      f.stage = e.stage();
      f.message = e.what();
      cells[i].fail = f;
    } catch (const std::exception& e) {
      f.stage = "pipeline";
      f.message = e.what();
      cells[i].fail = f;
    }
  });
  for (auto& c : cells) {
    if (c.ok) rep.results.push_back(std::move(*c.ok));
    if (c.fail) rep.failures.push_back(std::move(*c.fail));
  }
  auto key_less = [](const auto& x, const auto& y) {
    if (x.subject_id != y.subject_id) return x.subject_id < y.subject_id;
    return x.variant < y.variant;
  };
  std::stable_sort(rep.results.begin(), rep.results.end(), key_less);
  std::stable_sort(rep.failures.begin(), rep.failures.end(), key_less);

  for (const auto& c : cfgs) {
    std::vector<double> t;
    for (const auto& r : rep.results) {
      if (r.variant == c.variant) t.push_back(r.run.total_seconds());
    }
    TimingSummary s;
    s.variant = c.variant;
    s.n = t.size();
    if (!t.empty()) {
      double sum = 0.0;
      for (double x : t) sum += x;
      s.mean_seconds = sum / static_cast<double>(t.size());
      if (t.size() > 1) {
        double ss = 0.0;
        for (double x : t) ss += (x - s.mean_seconds) * (x - s.mean_seconds);
        s.sd_seconds = std::sqrt(ss / static_cast<double>(t.size() - 1));
      }
    }
    rep.timing.push_back(s);
  }
  return rep;
}

double report_number(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace report {

namespace {

Json directional_json(const DirectionalPBVC& d) {
  Json j;
  j["pbvc_percent"] = num(d.pbvc_percent);
  j["n_boundary"] = d.n_boundary;
  j["n_accepted"] = d.n_accepted;
  j["mean_disp_mm"] = num(d.mean_disp_mm);
  j["brain_volume_mm3"] = num(d.brain_volume_mm3);
  j["delta_volume_mm3"] = num(d.delta_volume_mm3);
  return j;
}

Json config_json(const PipelineConfig& c) {
  Json j;
  j["variant"] = variant_name(c.variant);
  j["config_hash"] = hex64(config_hash(c));
  Json settings = Json::object();
  const std::string text = canonical_config_text(c);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string line = text.substr(pos, eol - pos);
    const std::size_t eq = line.find('=');
    settings[line.substr(0, eq)] = line.substr(eq + 1);
    pos = eol + 1;
  }
  j["settings"] = settings;
  return j;
}

Json conventions_json() {
  Json j;
  j["displacement_sign"] = "positive when the second image's edge lies outward of the first";
  j["brain_volume"] = "GM + WM voxel volume of the direction's source segmentation";
  j["area_element"] = "voxel volume / max_k |n . a_k| over the voxel axes a_k";
  j["final_percent"] = "calibration_factor * (forward - backward) / 2";
  j["calibration"] =
      "per scan: run on the scan with its brain scaled by 1/sqrt(s_cal) and sqrt(s_cal) inside "
      "the extraction mask dilated twice; factor = 100 (s_cal^3 - 1) / measured; the pair uses "
      "the mean of the two scans' factors";
  j["halfway_target_grid"] = "first input scan";
  j["skull_mask"] = "accepted inner-skull points, dilated once";
  j["extractors"] = "threshold = built-in analog, external = supplied mask";
  j["segmenters"] = "kmeans3 = built-in analog, external = supplied label map";
  return j;
}

}  // namespace

Json meta(const std::vector<PipelineConfig>& cfgs, std::uint64_t seed, const std::string& timestamp) {
  Json m;
  m["version"] = kToolVersion;
  m["config_hash"] = hex64(run_config_hash(cfgs));
  m["seed"] = seed;
  m["timestamp"] = timestamp;
  Json c = Json::array();
  for (const auto& cfg : cfgs) c.push_back(config_json(cfg));
  m["configs"] = c;
  m["conventions"] = conventions_json();
  return m;
}

Json results(const std::vector<ResultRow>& rows) {
  Json results = Json::array();
  for (const auto& row : rows) {
    const PipelineRun& run = row.run;
    Json j;
    j["subject_id"] = row.subject_id;
    j["variant"] = variant_name(row.variant);
    j["config_hash"] = hex64(row.config_hash);
    Json p;
    p["final_percent"] = num(run.result.final_percent);
    p["calibration_factor"] = num(run.result.calibration_factor);
    p["forward"] = directional_json(run.result.forward);
    p["backward"] = directional_json(run.result.backward);
    j["pbvc"] = p;
    Json prov;
    prov["extractor"] = run.extractor;
    prov["segmenter"] = run.segmenter;
    prov["extract_hash_t0"] = hex64(run.extract_hash_a);
    prov["extract_hash_t1"] = hex64(run.extract_hash_b);
    prov["skull_hash_t0"] = hex64(run.skull_hash_a);
    prov["skull_hash_t1"] = hex64(run.skull_hash_b);
    prov["skull_points_t0"] = run.skull_points_a;
    prov["skull_points_t1"] = run.skull_points_b;
    prov["mask_discarded_fraction"] = num(run.mask_discarded_fraction);
    prov["unmapped_codes"] = run.unmapped_codes;
    j["provenance"] = prov;
    Json reg;
    Json m = Json::array();
    for (int a = 0; a < 4; ++a) {
      Json rowj = Json::array();
      for (int b = 0; b < 4; ++b) rowj.push_back(num(run.forward.matrix()(a, b)));
      m.push_back(rowj);
    }
    reg["forward"] = m;
    reg["cost_t0_to_t1"] = num(run.reg_cost_ab);
    reg["cost_t1_to_t0"] = num(run.reg_cost_ba);
    j["registration"] = reg;
    Json t;
    for (const auto& s : run.timings) t[s.stage] = num(s.seconds);
    t["total"] = num(run.total_seconds());
    j["timings"] = t;
    results.push_back(j);
  }
  return results;
}

Json failures(const std::vector<FailureRow>& rows) {
  Json failures = Json::array();
  for (const auto& f : rows) {
    Json j;
    j["subject_id"] = f.subject_id;
    j["variant"] = variant_name(f.variant);
    j["config_hash"] = hex64(f.config_hash);
    j["stage"] = f.stage;
    j["message"] = f.message;
    failures.push_back(j);
  }
  return failures;
}

Json timing(const std::vector<TimingSummary>& t) {
  Json timing = Json::array();
  for (const auto& s : t) {
    Json j;
    j["variant"] = variant_name(s.variant);
    j["n"] = s.n;
    j["mean_seconds"] = num(s.mean_seconds);
    j["sd_seconds"] = num(s.sd_seconds);
    timing.push_back(j);
  }
  return timing;
}

}  // namespace report

std::string report_json(const RunReport& r, const std::string& timestamp) {
  report::Json agg;
  agg["n_results"] = r.results.size();
  agg["n_failures"] = r.failures.size();
  agg["timing"] = report::timing(r.timing);
  report::Json doc;
  doc["meta"] = report::meta(r.configs, r.seed, timestamp);
  doc["results"] = report::results(r.results);
  doc["failures"] = report::failures(r.failures);
  doc["aggregates"] = agg;
  return doc.dump(2) + "\n";
}

void write_edges_csv(const std::vector<EdgeSample>& edges, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "point_x,point_y,point_z,normal_x,normal_y,normal_z,displacement_mm,quality,accepted\n";
  char buf[256];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%d\n", e.point[0],
                  e.point[1], e.point[2], e.normal[0], e.normal[1], e.normal[2], e.displacement_mm,
                  e.quality, e.accepted ? 1 : 0);
    f << buf;
  }
}

}  // namespace atrophy
