#include <doctest.h>

#include <cmath>

#include "atrophy/error.hpp"
#include "atrophy/pbvc/pbvc.hpp"
#include "atrophy/pbvc/pipeline.hpp"
#include "atrophy/phantom/phantom.hpp"

using namespace atrophy;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = Vec3(2, 2, 2);
  return s;
}

// Bright half-space x < x0 with a smooth edge of width w.
Volume edge_volume(const Grid& g, double x0, double w) {
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = 100.0 / (1.0 + std::exp((g.world(i)[0] - x0) / w));
  return Volume(g, d);
}

const Grid& line_grid() {
  static const Grid g({40, 12, 12}, Vec3(1, 1, 1));
  return g;
}

struct Pair {
  ScanInput a, b;
  double truth = 0.0;
};

// Rigid split of the 2 mm / 0.02 rad offset between the two acquisitions.
Pair acquired_pair(double s, double noise_frac) {
  const PhantomSpec spec = small_spec();
  const AtrophyPair p = apply_atrophy(spec, s);
  const Affine4 rig = rigid_transform(Vec3(0.02, -0.01, 0.015), Vec3(2, -1, 1), spec.center());
  const Affine4 h = sqrt_affine(rig);
  const double sigma = noise_frac * spec.intensities.wm;
  Pair out;
  out.a.image = apply_acquisition(p.t0.image, sigma, 0.0, h.inverse(), 1);
  out.b.image = apply_acquisition(p.t1.image, sigma, 0.0, h.inverse() * rig, 2);
  out.truth = p.truth.pbvc_true_percent;
  return out;
}

PipelineConfig uncalibrated() {
  PipelineConfig c;
  c.calibrate = false;
  return c;
}

}  // namespace

TEST_CASE("identical profiles give zero displacement") {
  const Volume a = edge_volume(line_grid(), 20.0, 1.5);
  const EdgeSample e = edge_displacement(a, a, Vec3(20, 6, 6), Vec3(1, 0, 0));
  CHECK(std::abs(e.displacement_mm) <= 1e-6);
  CHECK(e.quality == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.accepted);
}

TEST_CASE("synthetic 1 mm shifts") {
  const Volume a = edge_volume(line_grid(), 20.0, 1.5);
  // b(x) = a(x + 1): B's edge sits 1 mm inward along +x.
  const Volume b_in = edge_volume(line_grid(), 19.0, 1.5);
  const EdgeSample in = edge_displacement(a, b_in, Vec3(20, 6, 6), Vec3(1, 0, 0));
  CHECK(in.displacement_mm == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(in.quality >= 0.9);
  const Volume b_out = edge_volume(line_grid(), 21.0, 1.5);
  const EdgeSample out = edge_displacement(a, b_out, Vec3(20, 6, 6), Vec3(1, 0, 0));
  CHECK(std::abs(out.displacement_mm - 1.0) < 0.05);
  CHECK(out.quality >= 0.9);
  // Exact antisymmetry in (A, B).
  const EdgeSample back = edge_displacement(b_out, a, Vec3(20, 6, 6), Vec3(1, 0, 0));
  CHECK(back.displacement_mm == -out.displacement_mm);
  // Both estimates respect the search limit.
  const Volume far = edge_volume(line_grid(), 28.0, 1.5);
  CHECK(std::abs(edge_displacement(a, far, Vec3(20, 6, 6), Vec3(1, 0, 0)).displacement_mm) <= 3.0);
}

TEST_CASE("flat profiles are rejected") {
  const Volume c(line_grid(), 50.0);
  const EdgeSample e = edge_displacement(c, c, Vec3(20, 6, 6), Vec3(1, 0, 0));
  CHECK_FALSE(e.accepted);
  // Entirely outside the volume.
  const Volume a = edge_volume(line_grid(), 20.0, 1.5);
  CHECK_FALSE(edge_displacement(a, a, Vec3(200, 6, 6), Vec3(1, 0, 0)).accepted);
  EdgeOptions bad;
  bad.step_mm = 0.0;
  CHECK_THROWS_AS(edge_displacement(a, a, Vec3(20, 6, 6), Vec3(1, 0, 0), bad), Error);
}

TEST_CASE("tissue boundary") {
  const Grid g({16, 16, 16}, Vec3(1, 1, 1));
  std::vector<std::uint8_t> lab(g.size(), kBG);
  for (int k = 4; k < 12; ++k)
    for (int j = 4; j < 12; ++j)
      for (int i = 4; i < 12; ++i) lab[g.index(i, j, k)] = kWM;
  const SurfacePointSet s = tissue_boundary(TissueSegmentation(g, lab));
  CHECK(s.points.size() == 8 * 8 * 8 - 6 * 6 * 6);
  for (const auto& p : s.points) {
    const Vec3 v = p.position;
    const bool face = v[0] == 4 || v[0] == 11 || v[1] == 4 || v[1] == 11 || v[2] == 4 || v[2] == 11;
    REQUIRE(face);
    REQUIRE(std::abs(p.normal.norm() - 1.0) < 1e-6);
  }
  CHECK_THROWS_WITH_AS(tissue_boundary(TissueSegmentation(g, std::vector<std::uint8_t>(g.size(), kBG))),
                       doctest::Contains("empty boundary"), Error);
  // CSF does not count as tissue.
  CHECK_THROWS_AS(tissue_boundary(TissueSegmentation(g, std::vector<std::uint8_t>(g.size(), kCSF))), Error);
}

TEST_CASE("phantom boundary sits on the GM/CSF interface") {
  const PhantomSpec spec = small_spec();
  const Phantom p = make_head_phantom(spec);
  const SurfacePointSet s = tissue_boundary(p.labels);
  const double h = spec.spacing[0];
  for (const auto& q : s.points) {
    bool csf = false;
    for (int dz = -1; dz <= 1 && !csf; ++dz)
      for (int dy = -1; dy <= 1 && !csf; ++dy)
        for (int dx = -1; dx <= 1 && !csf; ++dx)
          csf = classify_point(spec, q.position + h * Vec3(dx, dy, dz)) == HeadClass::Csf;
    REQUIRE(csf);
    // Normals point away from the center.
    REQUIRE(q.normal.dot(q.position - spec.center()) > 0.0);
  }
}

TEST_CASE("area element") {
  const Grid g({4, 4, 4}, Vec3(2, 2, 2));
  CHECK(boundary_area_element(g, Vec3(1, 0, 0)) == doctest::Approx(4.0));
  CHECK(boundary_area_element(g, Vec3(1, 1, 0).normalized()) == doctest::Approx(4.0 * std::sqrt(2.0)));
}

TEST_CASE("directional pbvc on pre-aligned phantoms") {
  const PhantomSpec spec = small_spec();
  const AtrophyPair same = apply_atrophy(spec, 1.0);
  const DirectionalPBVC zero = pbvc_directional(same.t0.image, same.t1.image, same.t0.labels);
  CHECK(zero.pbvc_percent == 0.0);
  CHECK(zero.n_accepted <= zero.n_boundary);

  const AtrophyPair p = apply_atrophy(spec, 0.99);
  std::vector<EdgeSample> edges;
  const DirectionalPBVC d = pbvc_directional(p.t0.image, p.t1.image, p.t0.labels, {}, &edges);
  CHECK(std::abs(d.pbvc_percent - p.truth.pbvc_true_percent) < 0.3);
  // Aggregation formula.
  REQUIRE(edges.size() == d.n_boundary);
  double dv = 0.0;
  std::size_t acc = 0;
  for (const EdgeSample& e : edges) {
    REQUIRE(std::abs(e.displacement_mm) <= 3.0);
    if (!e.accepted) continue;
    REQUIRE(e.quality >= 0.5);
    ++acc;
    dv += e.displacement_mm * boundary_area_element(spec.grid(), e.normal);
  }
  CHECK(acc == d.n_accepted);
  CHECK(std::abs(d.pbvc_percent - 100.0 * dv / d.brain_volume_mm3) < 1e-9);

  const Volume n0 = apply_acquisition(same.t0.image, 0.02 * spec.intensities.wm, 0.0, Affine4::identity(), 3);
  const Volume n1 = apply_acquisition(same.t1.image, 0.02 * spec.intensities.wm, 0.0, Affine4::identity(), 4);
  CHECK(std::abs(pbvc_directional(n0, n1, same.t0.labels).pbvc_percent) < 0.2);
}

TEST_CASE("too few reliable edges") {
  const PhantomSpec spec = small_spec();
  const Phantom p = make_head_phantom(spec);
  const Volume flat(spec.grid(), 50.0);
  CHECK_THROWS_WITH_AS(pbvc_directional(flat, flat, p.labels), doctest::Contains("insufficient reliable edges"),
                       Error);
}

TEST_CASE("combine formula") {
  CHECK(combine_pbvc(-3.0, 2.0, 1.1) == doctest::Approx(1.1 * (-2.5)).epsilon(1e-15));
  CHECK(combine_pbvc(0.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("symmetric pipeline on identical and swapped scans") {
  const Pair p = acquired_pair(0.99, 0.02);
  const PipelineConfig cfg = uncalibrated();
  const PipelineRun same = pbvc_symmetric(p.a, p.a, cfg);
  CHECK(std::abs(same.result.final_percent) < 1e-3);

  const PipelineRun ab = pbvc_symmetric(p.a, p.b, cfg);
  const PipelineRun ba = pbvc_symmetric(p.b, p.a, cfg);
  const PBVCResult& r = ab.result;
  CHECK(std::abs(r.final_percent - r.calibration_factor * (r.forward.pbvc_percent - r.backward.pbvc_percent) / 2.0) <
        1e-9);
  CHECK(r.forward.pbvc_percent < 0.0);
  CHECK(r.backward.pbvc_percent > 0.0);
  CHECK(std::abs(r.final_percent - p.truth) < 0.5);
  CHECK(std::abs(ab.result.final_percent + ba.result.final_percent) <= 0.05);
  CHECK(ab.timings.size() >= 5);
}

TEST_CASE("measured pbvc is monotone in the scale") {
  double prev = -1e9;
  for (double s : {0.97, 0.98, 0.99, 1.0, 1.01}) {
    CAPTURE(s);
    const Pair p = acquired_pair(s, 0.0);
    const double v = pbvc_symmetric(p.a, p.b, uncalibrated()).result.final_percent;
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("self-calibration") {
  const Pair p = acquired_pair(0.99, 0.02);
  PipelineConfig cfg;
  clear_calibration_cache();
  const double f = calibrate_pbvc_cached(p.a, cfg);
  CHECK(f >= 0.8);
  CHECK(f <= 1.2);
  CHECK(calibrate_pbvc_cached(p.a, cfg) == f);

  const PipelineRun raw = pbvc_symmetric(p.a, p.b, uncalibrated());
  const PipelineRun cal = pbvc_symmetric(p.a, p.b, cfg);
  const double e_raw = std::abs(raw.result.final_percent - p.truth);
  const double e_cal = std::abs(cal.result.final_percent - p.truth);
  CHECK((e_cal <= e_raw || e_cal <= 0.3));
  CHECK(cal.result.calibration_factor != 1.0);

  PipelineConfig bad = cfg;
  bad.s_cal = 1.0;
  CHECK_THROWS_AS(calibrate_pbvc(p.a, bad), Error);
  bad.s_cal = 0.97;
  CHECK_THROWS_AS(calibrate_pbvc(p.a, bad), Error);
}

TEST_CASE("stage errors carry the stage tag") {
  ScanInput a, b;
  a.image = Volume(small_spec().grid(), 0.0);
  b.image = a.image;
  try {
    pbvc_symmetric(a, b, uncalibrated());
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "extract");
    CHECK(std::string(e.what()).find("[extract]") == 0);
  }
}
