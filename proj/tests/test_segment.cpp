#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/phantom/phantom.hpp"
#include "atrophy/segment/segment.hpp"

using namespace atrophy;
namespace fs = std::filesystem;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = Vec3(2, 2, 2);
  return s;
}

double class_dice(const TissueSegmentation& a, const TissueSegmentation& b, Tissue t) {
  std::size_t both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] == t ? 1 : 0;
    nb += b[i] == t ? 1 : 0;
    both += a[i] == t && b[i] == t ? 1 : 0;
  }
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "atrophy_test_segment";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("k-means recovers the phantom tissues") {
  const Phantom p = make_head_phantom(small_spec());
  const KMeansResult r = intensity_segment3(p.image, p.brain_mask);
  CHECK(class_dice(r.seg, p.labels, kCSF) >= 0.9);
  CHECK(class_dice(r.seg, p.labels, kGM) >= 0.9);
  CHECK(class_dice(r.seg, p.labels, kWM) >= 0.9);
  CHECK(r.centroids[0] < r.centroids[1]);
  CHECK(r.centroids[1] < r.centroids[2]);
  for (std::size_t i = 0; i < r.seg.size(); ++i) {
    if (!p.brain_mask[i]) REQUIRE(r.seg[i] == kBG);
  }
  const KMeansResult again = intensity_segment3(p.image, p.brain_mask);
  for (std::size_t i = 0; i < r.seg.size(); ++i) REQUIRE(r.seg[i] == again.seg[i]);
}

TEST_CASE("k-means centroids are ordered on noisy inputs") {
  const Grid g({20, 20, 20}, Vec3(1, 1, 1));
  BinaryMask all(g, std::vector<std::uint8_t>(g.size(), 1));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 200.0);
    std::vector<double> d(g.size());
    for (double& x : d) x = u(rng);
    const KMeansResult r = intensity_segment3(Volume(g, d), all);
    REQUIRE(r.centroids[0] < r.centroids[1]);
    REQUIRE(r.centroids[1] < r.centroids[2]);
    // Hard assignment: every voxel is nearest its own centroid.
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int c = r.seg[i] - 1;
      for (int o = 0; o < 3; ++o) REQUIRE(std::abs(d[i] - r.centroids[c]) <= std::abs(d[i] - r.centroids[o]) + 1e-9);
    }
  }
}

TEST_CASE("k-means rejects degenerate intensities") {
  const Grid g({10, 10, 10}, Vec3(1, 1, 1));
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = i % 2 == 0 ? 10.0 : 20.0;
  BinaryMask all(g, std::vector<std::uint8_t>(g.size(), 1));
  CHECK_THROWS_WITH_AS(intensity_segment3(Volume(g, d), all), doctest::Contains("degenerate"), Error);
  CHECK_THROWS_AS(intensity_segment3(Volume(g, d), BinaryMask(g)), Error);
}

TEST_CASE("structure names follow the canonical table") {
  CHECK(tissue_for_structure("Left-Lateral-Ventricle") == kCSF);
  CHECK(tissue_for_structure("left lateral ventricle") == kCSF);
  CHECK(tissue_for_structure("Right-Cerebral-Cortex") == kGM);
  CHECK(tissue_for_structure("Brain-Stem") == kWM);
  CHECK(tissue_for_structure("Left-Cerebral-White-Matter") == kWM);
  CHECK_FALSE(tissue_for_structure("Left-vessel").has_value());
  CHECK(normalize_structure_name("  Right__Inf-Lat   Vent ") == "right inf lat vent");

  const std::vector<std::pair<std::string, Tissue>> expected{
      {"lateral ventricle", kCSF}, {"inferior lateral ventricle", kCSF}, {"third ventricle", kCSF},
      {"fourth ventricle", kCSF},  {"outer csf", kCSF},                  {"cerebral cortex", kGM},
      {"thalamus", kGM},           {"caudate", kGM},                     {"putamen", kGM},
      {"pallidum", kGM},           {"hippocampus", kGM},                 {"amygdala", kGM},
      {"cerebellar cortex", kGM},  {"accumbens", kGM},                   {"ventral diencephalon", kGM},
      {"cerebral white matter", kWM}, {"cerebellar white matter", kWM},  {"brainstem", kWM}};
  CHECK(canonical_structures().size() == expected.size());
  for (const auto& [name, tissue] : expected) {
    CAPTURE(name);
    CHECK(tissue_for_structure(name) == tissue);
    CHECK(tissue_for_structure("left " + name) == tissue);
    CHECK(tissue_for_structure("right " + name) == tissue);
    CHECK(tissue_for_structure("Left-" + name) == tissue);
  }
}

TEST_CASE("aggregation is per voxel and reports unmapped codes") {
  const Grid g({4, 4, 4}, Vec3(1, 1, 1));
  AnatomicalLabelMap a{g, std::vector<std::int32_t>(g.size(), 0),
                       {{4, "Left-Lateral-Ventricle"}, {42, "Right-Cerebral-Cortex"},
                        {41, "Right-Cerebral-White-Matter"}, {30, "Left-vessel"}}};
  const int codes[] = {0, 4, 42, 41, 30, 77};
  for (std::size_t i = 0; i < g.size(); ++i) a.labels[i] = codes[i % 6];
  const AggregationResult r = aggregate_labels(a);
  const std::uint8_t want[] = {kBG, kCSF, kGM, kWM, kBG, kBG};
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(r.seg[i] == want[i % 6]);
  CHECK(r.unmapped_codes == std::vector<std::int32_t>{30, 77});

  // Permuting voxels permutes the output identically.
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  AnatomicalLabelMap b = a;
  for (std::size_t i = 0; i < g.size(); ++i) b.labels[i] = a.labels[perm[i]];
  const AggregationResult rb = aggregate_labels(b);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(rb.seg[i] == r.seg[perm[i]]);

  BinaryMask brain(g);
  brain.set(1, true);
  brain.set(2, true);
  const AggregationResult masked = aggregate_labels(a, &brain);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(masked.seg[i] == (brain[i] ? r.seg[i] : kBG));
}

TEST_CASE("external label maps and codebooks") {
  const Grid g({8, 8, 8}, Vec3(1, 1, 1));
  std::vector<double> d(g.size(), 0.0);
  d[10] = 4;
  d[11] = 42;
  d[12] = 99;
  const fs::path lab = temp_path("labels.nii.gz");
  save_volume(Volume(g, d), lab, NiftiType::Int16);
  const fs::path book = temp_path("codebook.csv");
  std::ofstream(book) << "code,name\n4, left lateral ventricle\n42,Right-Cerebral-Cortex\n99,Left-Unknown-Thing\n";
  const AnatomicalLabelMap m = load_external_labelmap(lab, book);
  CHECK(m.code_names.at(4) == "left lateral ventricle");
  const AggregationResult r = aggregate_labels(m);
  CHECK(r.seg[10] == kCSF);
  CHECK(r.seg[11] == kGM);
  CHECK(r.seg[12] == kBG);
  CHECK(r.unmapped_codes == std::vector<std::int32_t>{99});

  const fs::path flt = temp_path("float.nii.gz");
  save_volume(Volume(g, d), flt, NiftiType::Float32);
  CHECK_THROWS_WITH_AS(load_external_labelmap(flt, book), doctest::Contains("non-integer labels"), Error);

  const fs::path bad = temp_path("bad.csv");
  std::ofstream(bad) << "code,name\nfour,thing\n";
  CHECK_THROWS_WITH_AS(read_codebook(bad), doctest::Contains("codebook parse failure"), Error);
  std::ofstream(bad) << "id;label\n";
  CHECK_THROWS_WITH_AS(read_codebook(bad), doctest::Contains("codebook parse failure"), Error);
}

TEST_CASE("segmentation type invariants") {
  const Grid g({2, 2, 2}, Vec3(1, 1, 1));
  CHECK_THROWS_AS(TissueSegmentation(g, std::vector<std::uint8_t>(8, 4)), Error);
  CHECK_THROWS_AS(TissueSegmentation(g, std::vector<std::uint8_t>(7, 0)), Error);
  const TissueSegmentation s(g, {0, 1, 2, 3, 3, 2, 1, 0});
  CHECK(s.count(kWM) == 2);
  CHECK(s.brain_tissue().count() == 4);
}
