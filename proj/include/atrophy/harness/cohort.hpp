#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "atrophy/harness/manifest.hpp"
#include "atrophy/phantom/phantom.hpp"
#include "atrophy/segment/segment.hpp"

namespace atrophy {

struct CohortOptions {
  PhantomSpec spec;
  std::size_t n_subjects = 1;
  /// Explicit per-subject brain scales; when empty, scales are drawn
  /// uniformly from [scale_min, scale_max].
  std::vector<double> scales;
  double scale_min = 0.98;
  double scale_max = 1.0;
  /// Noise SD as a fraction of the WM intensity.
  double noise_fraction = 0.02;
  double bias_amp = 0.0;
  /// Rigid offset between t0 and t1, split evenly between the two scans.
  double translation_mm = 2.0;
  double rotation_rad = 0.02;
  bool write_masks = true;
  bool write_labelmaps = true;
  std::uint64_t seed = 0;
};

struct CohortSubject {
  std::string subject_id;
  double scale = 1.0;
  double pbvc_true_percent = 0.0;
  Affine4 offset;  // t0 world -> t1 world
};

/// Label codes and names written into cohort label maps (a subset of a
/// common whole-brain codebook).
const std::map<std::int32_t, std::string>& cohort_codebook();

/// Phantom intensity labels converted to codebook codes; left and right are
/// split at the grid center.
AnatomicalLabelMap phantom_labelmap(const Phantom& p, const PhantomSpec& spec);

/// The rigid t0 -> t1 offset for subject `index`: fixed magnitudes,
/// seeded directions.
Affine4 cohort_offset(const CohortOptions& opts, std::size_t index);

/// Writes sub-NNN_t{0,1}.nii.gz (plus masks and label maps when enabled),
/// codebook.csv, truth.csv and manifest.csv into `dir`. Returns the manifest.
SubjectManifest generate_cohort(const std::filesystem::path& dir, const CohortOptions& opts,
                                std::vector<CohortSubject>* truth = nullptr);

/// Truth record in the report layout: meta (version, config_hash of the
/// generator options, seed, timestamp, generator settings), results (one row
/// per subject), failures (empty), aggregates.
std::string cohort_truth_json(const CohortOptions& opts, const std::vector<CohortSubject>& subjects,
                              const std::string& timestamp);

/// Writes labels with datatype int16.
void save_labelmap(const AnatomicalLabelMap& m, const std::filesystem::path& path);

}  // namespace atrophy
