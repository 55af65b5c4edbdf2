#include "atrophy/pbvc/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/bspline.hpp"
#include "atrophy/imgvol/sampling.hpp"
#include "atrophy/util/hash.hpp"

namespace atrophy {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "VANILLA-ANALOG";
    case Variant::SS: return "SS-ANALOG";
    case Variant::SEG: return "SEG-ANALOG";
    case Variant::SSSEG: return "SS-SEG-ANALOG";
  }
  return "?";
}

std::string_view variant_short(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::SS: return "ss";
    case Variant::SEG: return "seg";
    case Variant::SSSEG: return "ss-seg";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  std::string l;
  for (char c : s) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Variant v : {Variant::Vanilla, Variant::SS, Variant::SEG, Variant::SSSEG}) {
    std::string full;
    for (char c : variant_name(v)) full += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l == variant_short(v) || l == full) return v;
  }
  throw Error("unknown variant '" + std::string(s) + "' (expected vanilla, ss, seg, ss-seg)");
}

Extractor extractor_of(Variant v) {
  return v == Variant::SS || v == Variant::SSSEG ? Extractor::External : Extractor::Threshold;
}

Segmenter segmenter_of(Variant v) {
  return v == Variant::SEG || v == Variant::SSSEG ? Segmenter::External : Segmenter::KMeans3;
}

Variant variant_of(Extractor e, Segmenter s) {
  if (e == Extractor::Threshold) return s == Segmenter::KMeans3 ? Variant::Vanilla : Variant::SEG;
  return s == Segmenter::KMeans3 ? Variant::SS : Variant::SSSEG;
}

std::string_view extractor_name(Extractor e) {
  return e == Extractor::Threshold ? "threshold" : "external";
}

std::string_view segmenter_name(Segmenter s) {
  return s == Segmenter::KMeans3 ? "kmeans3" : "external";
}

namespace {

void kv(std::string& out, const char* key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += key;
  out += '=';
  out += buf;
  out += '\n';
}

}  // namespace

std::string canonical_config_text(const PipelineConfig& c) {
  std::string s;
  s += "variant=";
  s += variant_name(c.variant);
  s += '\n';
  kv(s, "extract.frac", c.extract_frac);
  kv(s, "skull.max_distance_mm", c.skull.max_distance_mm);
  kv(s, "skull.step_mm", c.skull.step_mm);
  kv(s, "skull.normal_sigma_mm", c.skull.normal_sigma_mm);
  kv(s, "skull.rise_ratio", c.skull.rise_ratio);
  kv(s, "skull.floor_fraction", c.skull.floor_fraction);
  kv(s, "skull.min_points", static_cast<double>(c.skull.min_points));
  kv(s, "register.brain_weight", c.reg.brain_weight);
  kv(s, "register.skull_weight", c.reg.skull_weight);
  kv(s, "register.skull_brain_clearance", c.reg.skull_brain_clearance);
  kv(s, "register.min_sigma_vox", c.reg.min_sigma_vox);
  s += "register.pyramid=";
  for (std::size_t i = 0; i < c.reg.pyramid.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c.reg.pyramid[i]);
  }
  s += '\n';
  for (int i = 0; i < 4; ++i) {
    const std::string k = "register.step" + std::to_string(i);
    kv(s, k.c_str(), c.reg.initial_steps[static_cast<std::size_t>(i)]);
    const std::string t = "register.tol" + std::to_string(i);
    kv(s, t.c_str(), c.reg.tolerances[static_cast<std::size_t>(i)]);
  }
  kv(s, "register.max_sweeps", c.reg.max_sweeps);
  kv(s, "register.golden_iterations", c.reg.golden_iterations);
  kv(s, "pbvc.half_length_mm", c.pbvc.edge.half_length_mm);
  kv(s, "pbvc.step_mm", c.pbvc.edge.step_mm);
  kv(s, "pbvc.search_limit_mm", c.pbvc.edge.search_limit_mm);
  kv(s, "pbvc.shift_step_mm", c.pbvc.edge.shift_step_mm);
  kv(s, "pbvc.quality_floor", c.pbvc.edge.quality_floor);
  kv(s, "pbvc.refine_iterations", c.pbvc.edge.refine_iterations);
  s += "pbvc.interpolation=";
  s += c.pbvc.edge.interpolation == ProfileInterpolation::CubicBSpline ? "cubic" : "linear";
  s += '\n';
  kv(s, "pbvc.normal_sigma_mm", c.pbvc.normal_sigma_mm);
  kv(s, "pbvc.profile_sigma_mm", c.pbvc.profile_sigma_mm);
  kv(s, "pbvc.min_accept_fraction", c.pbvc.min_accept_fraction);
  kv(s, "calibrate", c.calibrate ? 1 : 0);
  kv(s, "s_cal", c.s_cal);
  s += "seed=" + std::to_string(c.seed) + '\n';
  return s;
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
  Fnv1a h;
  h.update(canonical_config_text(cfg));
  return h.digest();
}

double PipelineRun::total_seconds() const {
  double t = 0.0;
  for (const auto& s : timings) t += s.seconds;
  return t;
}

void validate_inputs(const ScanInput& a, const ScanInput& b, const PipelineConfig& cfg) {
  for (const ScanInput* s : {&a, &b}) {
    require_pipeline_grid(s->image.grid());
    if (extractor_of(cfg.variant) == Extractor::External) {
      if (!s->mask) throw Error("variant " + std::string(variant_name(cfg.variant)) +
                                " requires an external brain mask for each scan");
      if (!s->mask->grid().matches(s->image.grid(), 1e-3)) {
        throw Error("grid mismatch: external brain mask does not match its scan");
      }
    }
    if (segmenter_of(cfg.variant) == Segmenter::External) {
      if (!s->labels) throw Error("variant " + std::string(variant_name(cfg.variant)) +
                                  " requires an external label map for each scan");
      if (!s->labels->grid.matches(s->image.grid(), 1e-3)) {
        throw Error("grid mismatch: external label map does not match its scan");
      }
    }
  }
  if (cfg.calibrate && !(cfg.s_cal >= 0.98 && cfg.s_cal < 1.0)) {
    throw Error("calibration scale must lie in [0.98, 1)");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto staged(const char* stage, std::vector<StageTiming>& timings, F&& f) {
  const auto t0 = Clock::now();
  auto record = [&] {
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    timings.push_back({stage, std::max(dt, 1e-9)});
  };
  try {
    auto r = f();
    record();
    return r;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::uint64_t mask_hash(const BinaryMask& m) {
  Fnv1a h;
  h.update(m.bits());
  return h.digest();
}

BinaryMask extraction_mask(const ScanInput& s, const PipelineConfig& cfg) {
  if (extractor_of(cfg.variant) == Extractor::External) return *s.mask;
  return threshold_brain_extract(s.image, cfg.extract_frac);
}

TissueSegmentation segment_halfway(const ScanInput& s, const Volume& image_h,
                                   const BinaryMask& mask, const BinaryMask& mask_h,
                                   const Affine4& push, const PipelineConfig& cfg,
                                   std::vector<std::int32_t>& unmapped) {
  if (segmenter_of(cfg.variant) == Segmenter::KMeans3) {
    return intensity_segment3(image_h, mask_h).seg;
  }
  AggregationResult agg = aggregate_labels(*s.labels, &mask);
  unmapped.insert(unmapped.end(), agg.unmapped_codes.begin(), agg.unmapped_codes.end());
  const Grid& target = image_h.grid();
  return TissueSegmentation(target, resample_labels(agg.seg.labels(), agg.seg.grid(), push, target, kBG));
}

PipelineRun run_uncalibrated(const ScanInput& a, const ScanInput& b, const PipelineConfig& cfg,
                             bool keep_edges) {
  PipelineRun run;
  run.extractor = std::string(extractor_name(extractor_of(cfg.variant)));
  run.segmenter = std::string(segmenter_name(segmenter_of(cfg.variant)));
  run.mask_discarded_fraction = std::max(a.mask_discarded_fraction, b.mask_discarded_fraction);
  auto& tm = run.timings;

  struct Masks {
    BinaryMask a, b;
  };
  const Masks brain = staged("extract", tm, [&] {
    return Masks{extraction_mask(a, cfg), extraction_mask(b, cfg)};
  });
  run.extract_hash_a = mask_hash(brain.a);
  run.extract_hash_b = mask_hash(brain.b);

  struct Skulls {
    SkullResult a, b;
  };
  const Skulls skull = staged("skull", tm, [&] {
    return Skulls{derive_skull_mask(a.image, brain.a, cfg.skull),
                  derive_skull_mask(b.image, brain.b, cfg.skull)};
  });
  run.skull_hash_a = mask_hash(skull.a.mask);
  run.skull_hash_b = mask_hash(skull.b.mask);
  run.skull_points_a = skull.a.points.size();
  run.skull_points_b = skull.b.points.size();

  const SymmetricRegistration reg = staged("register", tm, [&] {
    return register_symmetric({&a.image, &brain.a, &skull.a.mask},
                              {&b.image, &brain.b, &skull.b.mask}, cfg.reg);
  });
  run.forward = reg.forward;
  run.reg_cost_ab = reg.a_to_b.cost_final;
  run.reg_cost_ba = reg.b_to_a.cost_final;

  struct HalfwayBundle {
    Halfway hw;
    BinaryMask mask_a, mask_b;
  };
  const Grid& target = a.image.grid();
  const HalfwayBundle hb = staged("halfway", tm, [&] {
    Halfway hw = to_halfway(a.image, b.image, reg.forward, target);
    BinaryMask ma = resample_mask(brain.a, hw.push_a, target);
    BinaryMask mb = resample_mask(brain.b, hw.push_b, target);
    return HalfwayBundle{std::move(hw), std::move(ma), std::move(mb)};
  });

  struct Segs {
    TissueSegmentation a, b;
  };
  const Segs seg = staged("segment", tm, [&] {
    TissueSegmentation sa = segment_halfway(a, hb.hw.a, brain.a, hb.mask_a, hb.hw.push_a, cfg,
                                            run.unmapped_codes);
    TissueSegmentation sb = segment_halfway(b, hb.hw.b, brain.b, hb.mask_b, hb.hw.push_b, cfg,
                                            run.unmapped_codes);
    return Segs{std::move(sa), std::move(sb)};
  });
  std::sort(run.unmapped_codes.begin(), run.unmapped_codes.end());
  run.unmapped_codes.erase(std::unique(run.unmapped_codes.begin(), run.unmapped_codes.end()),
                           run.unmapped_codes.end());

  staged("pbvc", tm, [&] {
    run.result.forward = pbvc_directional(hb.hw.a, hb.hw.b, seg.a, cfg.pbvc,
                                          keep_edges ? &run.edges_forward : nullptr);
    run.result.backward = pbvc_directional(hb.hw.b, hb.hw.a, seg.b, cfg.pbvc,
                                           keep_edges ? &run.edges_backward : nullptr);
    return 0;
  });
  run.result.calibration_factor = 1.0;
  run.result.final_percent =
      combine_pbvc(run.result.forward.pbvc_percent, run.result.backward.pbvc_percent, 1.0);
  return run;
}

}  // namespace

ScanInput scale_brain(const ScanInput& a, const BinaryMask& region, double s) {
  if (!(s > 0.0)) throw Error("scale_brain: scale must be positive");
  const Grid& g = a.image.grid();
  if (!region.grid().matches(g)) throw Error("scale_brain: region grid mismatch");
  const Vec3 c = region.centroid();
  ScanInput out = a;
  auto img = out.image.data();
  const CubicBSpline spline(a.image);
  // Source point for an output voxel inside the region: c + (x - c) / s.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!region[i]) continue;
    const Vec3 src = c + (g.world(i) - c) / s;
    img[i] = spline.sample(src, 0.0);
  }
  auto nearest = [&](std::size_t i, std::size_t* j) {
    const Vec3 p = g.to_voxel(c + (g.world(i) - c) / s);
    const auto x = static_cast<std::int64_t>(std::floor(p[0] + 0.5));
    const auto y = static_cast<std::int64_t>(std::floor(p[1] + 0.5));
    const auto z = static_cast<std::int64_t>(std::floor(p[2] + 0.5));
    if (!g.contains(x, y, z)) return false;
    *j = g.index(x, y, z);
    return true;
  };
  if (a.mask) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!region[i]) continue;
      std::size_t j = 0;
      out.mask->set(i, nearest(i, &j) && (*a.mask)[j]);
    }
  }
  if (a.labels) {
    if (!a.labels->grid.matches(g, 1e-3)) throw Error("scale_brain: label map grid mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!region[i]) continue;
      std::size_t j = 0;
      out.labels->labels[i] = nearest(i, &j) ? a.labels->labels[j] : 0;
    }
  }
  return out;
}

double calibrate_pbvc(const ScanInput& a, const PipelineConfig& cfg) {
  if (!(cfg.s_cal >= 0.98 && cfg.s_cal < 1.0)) {
    throw Error("calibration scale must lie in [0.98, 1)");
  }
  PipelineConfig raw = cfg;
  raw.calibrate = false;
  const BinaryMask region = dilate(extraction_mask(a, cfg), 2);
  // Both copies are interpolated (scales s^-1/2 and s^1/2) so neither side
  // carries less interpolation smoothing than the other.
  const double h = std::sqrt(cfg.s_cal);
  const ScanInput lo = scale_brain(a, region, 1.0 / h);
  const ScanInput hi = scale_brain(a, region, h);
  const PipelineRun run = run_uncalibrated(lo, hi, raw, false);
  const double measured = run.result.final_percent;
  if (!(std::abs(measured) >= 0.1)) {
    throw Error("calibration uninformative: measured change " + std::to_string(measured) + " pp");
  }
  const double expected = 100.0 * (cfg.s_cal * cfg.s_cal * cfg.s_cal - 1.0);
  return expected / measured;
}

namespace {

std::mutex& cache_mutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, double>& cache_map() {
  static std::map<std::string, double> cache;
  return cache;
}

}  // namespace

void clear_calibration_cache() {
  std::lock_guard<std::mutex> lock(cache_mutex());
  cache_map().clear();
}

double calibrate_pbvc_cached(const ScanInput& a, const PipelineConfig& cfg) {
  std::mutex& mu = cache_mutex();
  auto& cache = cache_map();
  PipelineConfig key_cfg = cfg;
  key_cfg.calibrate = false;
  key_cfg.seed = 0;
  Fnv1a h;
  const Grid& g = a.image.grid();
  const Index3 dims = g.dims();
  h.update(dims.data(), sizeof(dims));
  h.update(g.vox_to_world().matrix().data(), 16 * sizeof(double));
  h.update(a.image.data());
  if (a.mask && extractor_of(cfg.variant) == Extractor::External) h.update(a.mask->bits());
  if (a.labels && segmenter_of(cfg.variant) == Segmenter::External) {
    h.update(std::span<const std::int32_t>(a.labels->labels));
    for (const auto& [code, name] : a.labels->code_names) {
      h.update(&code, sizeof(code));
      h.update(name);
    }
  }
  const std::string key = hex64(h.digest()) + hex64(config_hash(key_cfg));
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double f = calibrate_pbvc(a, cfg);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, f);
  return f;
}

PipelineRun pbvc_symmetric(const ScanInput& a, const ScanInput& b, const PipelineConfig& cfg,
                           bool keep_edges) {
  validate_inputs(a, b, cfg);
  PipelineRun run = run_uncalibrated(a, b, cfg, keep_edges);
  if (cfg.calibrate) {
    const double f = staged("calibrate", run.timings, [&] {
      // Averaging over both scans keeps the factor symmetric in (a, b).
      return 0.5 * (calibrate_pbvc_cached(a, cfg) + calibrate_pbvc_cached(b, cfg));
    });
    run.result.calibration_factor = f;
    run.result.final_percent =
        combine_pbvc(run.result.forward.pbvc_percent, run.result.backward.pbvc_percent, f);
  }
  return run;
}

}  // namespace atrophy
