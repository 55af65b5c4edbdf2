#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atrophy/error.hpp"
#include "atrophy/harness/cohort.hpp"
#include "atrophy/harness/config.hpp"
#include "atrophy/harness/experiments.hpp"
#include "atrophy/harness/runner.hpp"

namespace fs = std::filesystem;
using namespace atrophy;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int parallelism = 1;
  std::string out = ".";
};

struct StageFlags {
  std::string variant;
  std::string extractor;
  std::string segmenter;
  std::string codebook;
};

void write_file(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << s;
}

PipelineConfig base_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config.empty()) cfg = load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

Variant resolve_variant(const StageFlags& f, Variant fallback) {
  if (!f.variant.empty()) {
    if (!f.extractor.empty() || !f.segmenter.empty()) {
      throw Error("give either --variant or --extractor/--segmenter, not both");
    }
    return parse_variant(f.variant);
  }
  Extractor e = extractor_of(fallback);
  Segmenter s = segmenter_of(fallback);
  if (!f.extractor.empty()) {
    if (f.extractor == "threshold") {
      e = Extractor::Threshold;
    } else if (f.extractor == "external") {
      e = Extractor::External;
    } else {
      throw Error("--extractor must be threshold or external");
    }
  }
  if (!f.segmenter.empty()) {
    if (f.segmenter == "kmeans3") {
      s = Segmenter::KMeans3;
    } else if (f.segmenter == "external") {
      s = Segmenter::External;
    } else {
      throw Error("--segmenter must be kmeans3 or external");
    }
  }
  return variant_of(e, s);
}

std::vector<PipelineConfig> variant_configs(const PipelineConfig& base,
                                            const std::vector<std::string>& names) {
  std::vector<PipelineConfig> out;
  if (names.empty()) {
    out.push_back(base);
    return out;
  }
  for (const auto& n : names) {
    PipelineConfig c = base;
    c.variant = parse_variant(n);
    out.push_back(c);
  }
  return out;
}

RunOptions run_options(const StageFlags& f, const SubjectManifest* m) {
  RunOptions o;
  if (!f.codebook.empty()) {
    o.codebook = f.codebook;
  } else if (m != nullptr && fs::is_regular_file(m->base_dir / "codebook.csv")) {
    o.codebook = m->base_dir / "codebook.csv";
  }
  return o;
}

void print_failures(const std::vector<FailureRow>& f) {
  for (const auto& x : f) {
    std::fprintf(stderr, "failed: %s %s [%s] %s\n", x.subject_id.c_str(),
                 std::string(variant_name(x.variant)).c_str(), x.stage.c_str(), x.message.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal brain volume change toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "INI/TOML pipeline configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed (pipeline config, phantom noise, benchmark sampling)");
  app.add_option("--parallelism", g.parallelism, "Worker threads for batches")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.fallthrough();

  auto add_stage_flags = [](CLI::App* c, StageFlags& f) {
    c->add_option("--variant", f.variant, "vanilla | ss | seg | ss-seg (or the -ANALOG names)");
    c->add_option("--extractor", f.extractor, "threshold | external");
    c->add_option("--segmenter", f.segmenter, "kmeans3 | external");
    c->add_option("--codebook", f.codebook, "code,name CSV for external label maps");
  };

  // phantom generate
  auto* phantom = app.add_subcommand("phantom", "Synthetic head phantoms");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("generate", "Write a phantom cohort with a manifest");
  CohortOptions co;
  int dims = 128;
  double spacing = 1.5;
  bool no_masks = false, no_labels = false;
  gen->add_option("--n-subjects", co.n_subjects, "Number of subject pairs")->check(CLI::PositiveNumber);
  gen->add_option("--scale", co.scales, "Brain scale per subject (repeat or comma-separate)")->delimiter(',');
  gen->add_option("--scale-min", co.scale_min, "Lower bound of drawn scales");
  gen->add_option("--scale-max", co.scale_max, "Upper bound of drawn scales");
  gen->add_option("--noise-fraction", co.noise_fraction, "Noise SD as a fraction of WM intensity");
  gen->add_option("--bias", co.bias_amp, "Bias-field amplitude");
  gen->add_option("--translation-mm", co.translation_mm, "Rigid t0/t1 offset translation");
  gen->add_option("--rotation-rad", co.rotation_rad, "Rigid t0/t1 offset rotation");
  gen->add_option("--dims", dims, "Cubic grid size")->check(CLI::Range(32, 512));
  gen->add_option("--spacing", spacing, "Voxel spacing in mm")->check(CLI::PositiveNumber);
  gen->add_option("--brain-radius", co.spec.brain_radius_mm, "Brain radius in mm");
  gen->add_flag("--no-masks", no_masks, "Skip brain mask files");
  gen->add_flag("--no-labelmaps", no_labels, "Skip label map files");

  // pipeline run / batch
  auto* pipeline = app.add_subcommand("pipeline", "Run the PBVC pipeline");
  pipeline->require_subcommand(1);
  auto* run = pipeline->add_subcommand("run", "One scan pair");
  StageFlags run_flags;
  std::string t0, t1;
  std::vector<std::string> masks, labelmaps;
  bool dump_edges = false, reversed = false;
  run->add_option("t0", t0, "Baseline scan (NIfTI)")->required()->check(CLI::ExistingFile);
  run->add_option("t1", t1, "Follow-up scan (NIfTI)")->required()->check(CLI::ExistingFile);
  add_stage_flags(run, run_flags);
  run->add_option("--brain-mask", masks, "External brain masks for t0 and t1")->expected(2);
  run->add_option("--labelmap", labelmaps, "External label maps for t0 and t1")->expected(2);
  run->add_flag("--dump-edges", dump_edges, "Write per-edge CSVs for both directions");
  run->add_flag("--reverse", reversed, "Process (t1, t0)");

  auto* batch = pipeline->add_subcommand("batch", "All subjects of a manifest");
  StageFlags batch_flags;
  std::string manifest_path;
  std::vector<std::string> variants;
  batch->add_option("manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  add_stage_flags(batch, batch_flags);
  batch->add_option("--variants", variants, "Comma-separated variants")->delimiter(',');

  // experiments
  auto* exp = app.add_subcommand("experiment", "Cohort experiments");
  exp->require_subcommand(1);
  auto* cons = exp->add_subcommand("consistency", "Scan-order residuals and MFRR");
  StageFlags cons_flags;
  std::string baseline = "vanilla";
  double inject = 0.0;
  cons->add_option("manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  add_stage_flags(cons, cons_flags);
  cons->add_option("--variants", variants, "Comma-separated variants")->delimiter(',');
  cons->add_option("--baseline", baseline, "Baseline variant");
  cons->add_option("--inject-bias", inject, "Add this many pp to every forward-order PBVC");

  auto* corr = exp->add_subcommand("correlate", "Clinical correlations with Steiger tests");
  std::string pbvc_path, clinical_path;
  CorrelationOptions copt;
  corr->add_option("pbvc_table", pbvc_path, "subject_id,variant,pbvc_forward_order,pbvc_reverse_order")
      ->required()
      ->check(CLI::ExistingFile);
  corr->add_option("clinical", clinical_path, "subject_id,measure,value_t0,value_t1")
      ->required()
      ->check(CLI::ExistingFile);
  corr->add_option("--baseline", copt.baseline, "Baseline variant id");
  corr->add_option("--alpha", copt.alpha, "Significance level after correction");
  corr->add_option("--bonferroni-m", copt.bonferroni_m, "Comparisons per test (default: non-baseline variants)");

  auto* bench = exp->add_subcommand("bench", "End-to-end timing on a seeded subject sample");
  StageFlags bench_flags;
  BenchmarkOptions bopt;
  bench->add_option("manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  add_stage_flags(bench, bench_flags);
  bench->add_option("--variants", variants, "Comma-separated variants")->delimiter(',');
  bench->add_option("--n-subjects", bopt.n_subjects, "Subjects to sample");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(g.out);
    const std::string ts = utc_timestamp();
    if (gen->parsed()) {
      co.spec.dims = {dims, dims, dims};
      co.spec.spacing = Vec3(spacing, spacing, spacing);
      co.write_masks = !no_masks;
      co.write_labelmaps = !no_labels;
      if (!co.scales.empty() && gen->count("--n-subjects") == 0) co.n_subjects = co.scales.size();
      if (g.seed) co.seed = *g.seed;
      std::vector<CohortSubject> truth;
      generate_cohort(out, co, &truth);
      write_file(out / "truth.json", cohort_truth_json(co, truth, ts));
      for (const auto& t : truth) {
        std::printf("%s scale %.6f true PBVC %.4f %%\n", t.subject_id.c_str(), t.scale, t.pbvc_true_percent);
      }
      std::printf("manifest: %s\n", (out / "manifest.csv").string().c_str());
      return 0;
    }
    if (run->parsed()) {
      PipelineConfig cfg = base_config(g);
      cfg.variant = resolve_variant(run_flags, cfg.variant);
      ManifestRow row;
      row.subject_id = fs::path(t0).stem().stem().string();
      row.t0 = t0;
      row.t1 = t1;
      if (masks.size() == 2) {
        row.mask_t0 = masks[0];
        row.mask_t1 = masks[1];
      }
      if (labelmaps.size() == 2) {
        row.labelmap_t0 = labelmaps[0];
        row.labelmap_t1 = labelmaps[1];
      }
      RunOptions ro = run_options(run_flags, nullptr);
      ro.keep_edges = dump_edges;
      ro.reversed = reversed;
      RunReport rep;
      rep.configs = {cfg};
      rep.seed = cfg.seed;
      try {
        rep.results.push_back({row.subject_id, cfg.variant, config_hash(cfg), run_pipeline(row, cfg, ro)});
        const PipelineRun& r = rep.results.back().run;
        rep.timing.push_back({cfg.variant, 1, r.total_seconds(), 0.0});
        std::printf("PBVC %.4f %% (forward %.4f, backward %.4f, calibration %.4f)\n",
                    r.result.final_percent, r.result.forward.pbvc_percent,
                    r.result.backward.pbvc_percent, r.result.calibration_factor);
        if (dump_edges) {
          write_edges_csv(r.edges_forward, out / "edges_forward.csv");
          write_edges_csv(r.edges_backward, out / "edges_backward.csv");
        }
      } catch (const StageError& e) {
        rep.failures.push_back({row.subject_id, cfg.variant, config_hash(cfg), e.stage(), e.what()});
        rep.timing.push_back({cfg.variant, 0, 0.0, 0.0});
      }
      write_file(out / "report.json", report_json(rep, ts));
      print_failures(rep.failures);
      return rep.failures.empty() ? 0 : 1;
    }
    if (batch->parsed() || cons->parsed() || bench->parsed()) {
      const StageFlags& flags = batch->parsed() ? batch_flags : cons->parsed() ? cons_flags : bench_flags;
      PipelineConfig cfg = base_config(g);
      if (!flags.variant.empty() || !flags.extractor.empty() || !flags.segmenter.empty()) {
        if (!variants.empty()) throw Error("give either --variants or a single-variant flag");
        cfg.variant = resolve_variant(flags, cfg.variant);
      }
      const std::vector<PipelineConfig> cfgs = variant_configs(cfg, variants);
      const SubjectManifest m = read_manifest(manifest_path);
      const RunOptions ro = run_options(flags, &m);
      if (batch->parsed()) {
        const RunReport rep = run_batch(m, cfgs, g.parallelism, ro);
        write_file(out / "report.json", report_json(rep, ts));
        for (const auto& r : rep.results) {
          std::printf("%s %s PBVC %.4f %%\n", r.subject_id.c_str(),
                      std::string(variant_name(r.variant)).c_str(), r.run.result.final_percent);
        }
        print_failures(rep.failures);
        std::printf("%zu results, %zu failures; report %s\n", rep.results.size(), rep.failures.size(),
                    (out / "report.json").string().c_str());
        return 0;
      }
      if (cons->parsed()) {
        ConsistencyOptions o;
        o.baseline = parse_variant(baseline);
        o.inject_forward_bias_pp = inject;
        o.run = ro;
        const ConsistencyReport rep = consistency_experiment(m, cfgs, g.parallelism, o);
        write_file(out / "consistency.json", consistency_json(rep, ts));
        write_file(out / "pbvc_table.csv", pbvc_table_csv(rep));
        for (const auto& v : rep.variants) {
          std::printf("%-16s pairs %zu excluded %zu MFRR %.4f SD %.4f", std::string(variant_name(v.variant)).c_str(),
                      v.pairs.size(), v.excluded, v.mfrr.mean, v.mfrr.sd);
          if (v.relative_improvement) std::printf(" improvement %.1f %%", *v.relative_improvement);
          std::printf("\n");
        }
        print_failures(rep.forward.failures);
        print_failures(rep.reverse.failures);
        return 0;
      }
      if (g.seed) bopt.seed = *g.seed;
      bopt.run = ro;
      const BenchmarkSummary b = benchmark(m, cfgs, g.parallelism, bopt);
      write_file(out / "bench.json", benchmark_json(b, ts));
      const std::string table = benchmark_table_text(b);
      write_file(out / "bench.txt", table);
      std::fputs(table.c_str(), stdout);
      print_failures(b.report.failures);
      return 0;
    }
    if (corr->parsed()) {
      const CorrelationReport rep =
          correlation_experiment(read_pbvc_table(pbvc_path), read_clinical(clinical_path), copt);
      write_file(out / "correlation.json", correlation_json(rep, ts));
      const std::string table = correlation_table_text(rep);
      write_file(out / "correlation.txt", table);
      std::fputs(table.c_str(), stdout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
