#include "atrophy/harness/cohort.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/register/register.hpp"
#include "atrophy/util/hash.hpp"
#include "report_json.hpp"

namespace atrophy {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vec3 unit_direction(NormalSource& n) {
  for (;;) {
    const Vec3 v(n.next(), n.next(), n.next());
    if (v.norm() > 1e-6) return v.normalized();
  }
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << s;
}

}  // namespace

const std::map<std::int32_t, std::string>& cohort_codebook() {
  static const std::map<std::int32_t, std::string> m{
      {2, "Left-Cerebral-White-Matter"},
      {3, "Left-Cerebral-Cortex"},
      {24, "CSF"},
      {41, "Right-Cerebral-White-Matter"},
      {42, "Right-Cerebral-Cortex"},
  };
  return m;
}

AnatomicalLabelMap phantom_labelmap(const Phantom& p, const PhantomSpec& spec) {
  AnatomicalLabelMap m;
  m.grid = p.labels.grid();
  m.code_names = cohort_codebook();
  m.labels.assign(p.labels.size(), 0);
  const double cx = spec.center()[0];
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const bool left = m.grid.world(i)[0] < cx;
    switch (p.labels[i]) {
      case kCSF: m.labels[i] = 24; break;
      case kGM: m.labels[i] = left ? 3 : 42; break;
      case kWM: m.labels[i] = left ? 2 : 41; break;
      default: break;
    }
  }
  return m;
}

Affine4 cohort_offset(const CohortOptions& opts, std::size_t index) {
  NormalSource n(mix(opts.seed, 1000003ULL + index));
  const Vec3 axis = unit_direction(n);
  const Vec3 dir = unit_direction(n);
  const Vec3 c = opts.spec.center();
  const Mat3 rot = Eigen::AngleAxisd(opts.rotation_rad, axis).toRotationMatrix();
  return Affine4::from_parts(rot, c - rot * c + opts.translation_mm * dir);
}

void save_labelmap(const AnatomicalLabelMap& m, const std::filesystem::path& path) {
  std::vector<double> d(m.labels.begin(), m.labels.end());
  save_volume(Volume(m.grid, std::move(d)), path, NiftiType::Int16);
}

SubjectManifest generate_cohort(const std::filesystem::path& dir, const CohortOptions& opts,
                                std::vector<CohortSubject>* truth) {
  opts.spec.validate();
  if (opts.n_subjects == 0) throw Error("cohort: n_subjects must be positive");
  if (!opts.scales.empty() && opts.scales.size() != opts.n_subjects) {
    throw Error("cohort: need one scale per subject");
  }
  if (!(opts.scale_min <= opts.scale_max)) throw Error("cohort: scale_min exceeds scale_max");
  if (!(opts.noise_fraction >= 0.0)) throw Error("cohort: noise fraction must be >= 0");
  std::filesystem::create_directories(dir);

  std::mt19937_64 eng(mix(opts.seed, 0));
  SubjectManifest man;
  man.base_dir = dir;
  std::vector<CohortSubject> subjects;
  std::string truth_csv = "subject_id,scale,pbvc_true_percent\n";
  const double sigma = opts.noise_fraction * opts.spec.intensities.wm;
  for (std::size_t i = 0; i < opts.n_subjects; ++i) {
    double s = 0.0;
    if (!opts.scales.empty()) {
      s = opts.scales[i];
    } else {
      const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
      s = opts.scale_min + u * (opts.scale_max - opts.scale_min);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "sub-%03zu", i + 1);
    CohortSubject cs;
    cs.subject_id = id;
    cs.scale = s;
    cs.pbvc_true_percent = 100.0 * (s * s * s - 1.0);
    cs.offset = cohort_offset(opts, i);
    const Affine4 h = sqrt_affine(cs.offset);

    PhantomSpec spec = opts.spec;
    const Phantom p0 = make_head_phantom(spec, 1.0, h.inverse());
    const Phantom p1 = make_head_phantom(spec, s, h);
    const Affine4 id4 = Affine4::identity();
    const Volume v0 = apply_acquisition(p0.image, sigma, opts.bias_amp, id4, mix(opts.seed, 2 * i + 1));
    const Volume v1 = apply_acquisition(p1.image, sigma, opts.bias_amp, id4, mix(opts.seed, 2 * i + 2));

    ManifestRow row;
    row.subject_id = id;
    row.t0 = dir / (cs.subject_id + "_t0.nii.gz");
    row.t1 = dir / (cs.subject_id + "_t1.nii.gz");
    save_volume(v0, row.t0);
    save_volume(v1, row.t1);
    if (opts.write_masks) {
      row.mask_t0 = dir / (cs.subject_id + "_mask_t0.nii.gz");
      row.mask_t1 = dir / (cs.subject_id + "_mask_t1.nii.gz");
      save_volume(p0.brain_mask.to_volume(), *row.mask_t0, NiftiType::UInt8);
      save_volume(p1.brain_mask.to_volume(), *row.mask_t1, NiftiType::UInt8);
    }
    if (opts.write_labelmaps) {
      row.labelmap_t0 = dir / (cs.subject_id + "_labels_t0.nii.gz");
      row.labelmap_t1 = dir / (cs.subject_id + "_labels_t1.nii.gz");
      save_labelmap(phantom_labelmap(p0, spec), *row.labelmap_t0);
      save_labelmap(phantom_labelmap(p1, spec), *row.labelmap_t1);
    }
    man.rows.push_back(row);
    char line[128];
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g\n", id, s, cs.pbvc_true_percent);
    truth_csv += line;
    subjects.push_back(cs);
  }
  std::string codebook = "code,name\n";
  for (const auto& [code, name] : cohort_codebook()) codebook += std::to_string(code) + "," + name + "\n";
  write_text(dir / "codebook.csv", codebook);
  write_text(dir / "truth.csv", truth_csv);
  write_text(dir / "manifest.csv", manifest_csv(man));
  if (truth != nullptr) *truth = std::move(subjects);
  return man;
}

std::string cohort_truth_json(const CohortOptions& opts, const std::vector<CohortSubject>& subjects,
                              const std::string& timestamp) {
  using report::Json;
  using report::num;
  const PhantomSpec& sp = opts.spec;
  Json g;
  g["dims"] = {sp.dims[0], sp.dims[1], sp.dims[2]};
  g["spacing_mm"] = {num(sp.spacing[0]), num(sp.spacing[1]), num(sp.spacing[2])};
  g["brain_radius_mm"] = num(sp.brain_radius_mm);
  g["axis_ratios"] = {num(sp.axis_ratios[0]), num(sp.axis_ratios[1]), num(sp.axis_ratios[2])};
  g["shape_modulation"] = num(sp.shape_modulation);
  g["layer_fracs"] = {num(sp.layer_fracs[0]), num(sp.layer_fracs[1]), num(sp.layer_fracs[2])};
  g["skull_inner_offset_mm"] = num(sp.skull_inner_offset_mm);
  g["skull_thickness_mm"] = num(sp.skull_thickness_mm);
  g["scalp_thickness_mm"] = num(sp.scalp_thickness_mm);
  const PhantomIntensities& in = sp.intensities;
  g["intensities"] = {{"background", num(in.background)}, {"csf", num(in.csf)}, {"gm", num(in.gm)},
                      {"wm", num(in.wm)}, {"skull", num(in.skull)}, {"scalp", num(in.scalp)}};
  g["noise_fraction"] = num(opts.noise_fraction);
  g["bias_amp"] = num(opts.bias_amp);
  g["translation_mm"] = num(opts.translation_mm);
  g["rotation_rad"] = num(opts.rotation_rad);
  g["scale_min"] = num(opts.scale_min);
  g["scale_max"] = num(opts.scale_max);

  Json meta;
  meta["version"] = kToolVersion;
  meta["config_hash"] = hex64([&] {
    Fnv1a h;
    h.update(g.dump());
    for (double s : opts.scales) h.update(&s, sizeof s);
    return h.digest();
  }());
  meta["seed"] = opts.seed;
  meta["timestamp"] = timestamp;
  meta["generator"] = g;

  Json rows = Json::array();
  for (const CohortSubject& cs : subjects) {
    Json r;
    r["subject_id"] = cs.subject_id;
    r["scale"] = num(cs.scale);
    r["pbvc_true_percent"] = num(cs.pbvc_true_percent);
    r["brain_volume_t0_mm3"] = num(analytic_brain_volume(sp, 1.0));
    r["brain_volume_t1_mm3"] = num(analytic_brain_volume(sp, cs.scale));
    Json m = Json::array();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m.push_back(num(cs.offset.matrix()(i, j)));
    r["offset_t0_to_t1"] = m;
    rows.push_back(r);
  }
  Json out;
  out["meta"] = meta;
  out["results"] = rows;
  out["failures"] = Json::array();
  out["aggregates"] = {{"n_results", subjects.size()}, {"n_failures", 0}};
  return out.dump(2) + "\n";
}

}  // namespace atrophy
