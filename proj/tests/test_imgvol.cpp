#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/bspline.hpp"
#include "atrophy/imgvol/filters.hpp"
#include "atrophy/imgvol/mask.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/imgvol/percentile.hpp"
#include "atrophy/imgvol/sampling.hpp"

using namespace atrophy;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "atrophy_test_imgvol";
  fs::create_directories(p);
  return p;
}

Volume random_volume(const Grid& g, std::uint64_t seed, double scale = 100.0) {
  std::mt19937_64 eng(seed);
  std::vector<double> d(g.size());
  for (auto& x : d) x = static_cast<double>(eng() >> 40) / static_cast<double>(1 << 24) * scale;
  return Volume(g, d);
}

Grid oblique_grid(const Index3& dims) {
  Mat3 l;
  l << 1.2, 0.1, 0.0, -0.05, 0.9, 0.2, 0.0, -0.1, 1.5;
  return Grid(dims, Affine4::from_parts(l, Vec3(-10.0, 4.0, 2.5)));
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream f(p, std::ios::binary);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("grid indexing and world mapping") {
  const Grid g({4, 5, 6}, Vec3(1.5, 2.0, 2.5), Vec3(10, 20, 30));
  CHECK(g.size() == 120);
  CHECK(g.index(1, 2, 3) == 1 + 4 * (2 + 5 * 3));
  const Index3 c = g.coords(g.index(3, 4, 5));
  CHECK(c == Index3{3, 4, 5});
  CHECK((g.world(1, 1, 1) - Vec3(11.5, 22.0, 32.5)).norm() < 1e-12);
  CHECK((g.to_voxel(g.world(2, 3, 4)) - Vec3(2, 3, 4)).norm() < 1e-12);
  CHECK(g.voxel_volume() == doctest::Approx(7.5));
  CHECK_FALSE(g.contains(4, 0, 0));
  CHECK_THROWS_AS(Grid({1, 5, 6}, Vec3(1, 1, 1)), Error);
  CHECK_THROWS_AS(Grid({4, 5, 6}, Vec3(1, -1, 1)), Error);
  CHECK_THROWS_AS(require_pipeline_grid(g), Error);
  require_pipeline_grid(Grid({8, 8, 8}, Vec3(1, 1, 1)));
}

TEST_CASE("volume rejects non-finite data and length mismatch") {
  const Grid g({2, 2, 2}, Vec3(1, 1, 1));
  CHECK_THROWS_AS(Volume(g, std::vector<double>(7, 0.0)), Error);
  std::vector<double> d(8, 1.0);
  d[3] = std::nan("");
  CHECK_THROWS_AS(Volume(g, d), Error);
}

TEST_CASE("affine inverse and composition") {
  const Grid g = oblique_grid({3, 3, 3});
  const Affine4& t = g.vox_to_world();
  CHECK((t * t.inverse()).max_abs_diff(Affine4::identity()) < 1e-12);
  const Vec3 p(0.3, -2.0, 5.0);
  CHECK(((t * t).apply(p) - t.apply(t.apply(p))).norm() < 1e-12);
  const fs::path f = temp_dir() / "t.txt";
  write_affine_text(t, f);
  CHECK(read_affine_text(f).max_abs_diff(t) == 0.0);
}

TEST_CASE("NIfTI float32 round trip is exact, plain and gzipped") {
  const Grid g = oblique_grid({9, 10, 11});
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(std::sin(0.37 * i) * 1234.5);
  const Volume v(g, d);
  for (const char* name : {"a.nii", "a.nii.gz"}) {
    const fs::path p = temp_dir() / name;
    save_volume(v, p);
    const NiftiImage r = read_nifti(p);
    CHECK(r.datatype == NiftiType::Float32);
    CHECK(r.volume.grid().matches(g, 1e-6));
    for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(r.volume[i] == d[i]);
  }
}

TEST_CASE("NIfTI integer types round values") {
  const Grid g({8, 8, 8}, Vec3(1, 1, 1));
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(i % 7) + 0.4;
  const fs::path p = temp_dir() / "u8.nii.gz";
  save_volume(Volume(g, d), p, NiftiType::UInt8);
  const NiftiImage r = read_nifti(p);
  CHECK(r.datatype == NiftiType::UInt8);
  for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(r.volume[i] == std::round(d[i]));
  const fs::path q = temp_dir() / "i16.nii";
  for (auto& x : d) x = -x * 100;
  save_volume(Volume(g, d), q, NiftiType::Int16);
  const NiftiImage s = read_nifti(q);
  for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(s.volume[i] == std::round(d[i]));
}

TEST_CASE("NIfTI scaling and rejection paths") {
  const Grid g({8, 8, 8}, Vec3(2, 2, 2));
  const fs::path p = temp_dir() / "s.nii";
  save_volume(Volume(g, 3.0), p, NiftiType::Int16);
  auto bytes = read_bytes(p);
  const float slope = 2.0f, inter = -1.0f;
  std::memcpy(bytes.data() + 112, &slope, 4);
  std::memcpy(bytes.data() + 116, &inter, 4);
  write_bytes(p, bytes);
  CHECK(read_nifti(p).volume[5] == 5.0);

  auto swapped = read_bytes(p);
  std::int32_t be = 0;
  const unsigned char b348[4] = {0, 0, 1, 0x5c};
  std::memcpy(&be, b348, 4);
  std::memcpy(swapped.data(), &be, 4);
  write_bytes(p, swapped);
  CHECK_THROWS_WITH_AS(read_nifti(p), doctest::Contains("big-endian"), Error);

  auto ext = read_bytes(temp_dir() / "a.nii");
  ext[348] = 1;
  write_bytes(p, ext);
  CHECK_THROWS_AS(read_nifti(p), Error);
  CHECK_THROWS_AS(read_nifti(temp_dir() / "missing.nii"), Error);
  write_bytes(p, std::vector<char>(100, 0));
  CHECK_THROWS_AS(read_nifti(p), Error);
}

TEST_CASE("load_volume enforces the pipeline minimum") {
  const fs::path p = temp_dir() / "small.nii";
  save_volume(Volume(Grid({4, 8, 8}, Vec3(1, 1, 1)), 1.0), p);
  CHECK_THROWS_AS(load_volume(p), Error);
}

TEST_CASE("trilinear sampling reproduces affine functions") {
  const Grid g = oblique_grid({10, 9, 8});
  std::vector<double> d(g.size());
  auto f = [](const Vec3& p) { return 2.0 * p[0] - 0.5 * p[1] + 0.25 * p[2] + 3.0; };
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = f(g.world(i));
  const Volume v(g, d);
  std::mt19937_64 eng(1);
  for (int t = 0; t < 200; ++t) {
    const Vec3 x(0.01 * (eng() % 900), 0.01 * (eng() % 800), 0.01 * (eng() % 700));
    const Vec3 w = g.vox_to_world().apply(x);
    CHECK(trilinear_sample(v, w, -1) == doctest::Approx(f(w)).epsilon(1e-12));
  }
  CHECK(trilinear_sample(v, g.world(0, 0, 0) - 5.0 * Vec3::Ones(), -7.0) == -7.0);
  CHECK(trilinear_sample(v, g.world(9, 8, 7), -7.0) == doctest::Approx(f(g.world(9, 8, 7))));
}

TEST_CASE("resample by the identity and by a voxel shift") {
  const Grid g({12, 12, 12}, Vec3(1, 1, 1));
  const Volume v = random_volume(g, 3);
  const Volume same = resample(v, Affine4::identity(), g);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(same[i] == v[i]);
  const Volume shifted = resample(v, Affine4::translation(Vec3(1, 0, 0)), g, -1);
  CHECK(shifted.at(5, 4, 3) == v.at(4, 4, 3));
  CHECK(shifted.at(0, 4, 3) == -1);
}

TEST_CASE("cubic B-spline interpolates the samples and reproduces cubics") {
  const Grid g = oblique_grid({14, 12, 10});
  const Volume v = random_volume(g, 4);
  const CubicBSpline s(v);
  for (std::size_t i = 0; i < g.size(); ++i) {
    REQUIRE(std::abs(s.sample(g.world(i), -1) - v[i]) < 1e-9);
  }
  // Quadratic data, sampled away from the mirrored borders.
  std::vector<double> d(g.size());
  auto q = [](double x, double y, double z) { return 0.1 * x * x - 0.3 * y * z + z + 2; };
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index3 c = g.coords(i);
    d[i] = q(c[0], c[1], c[2]);
  }
  const CubicBSpline sq(Volume(g, d));
  for (double x = 4.0; x <= 9.0; x += 0.3) {
    CHECK(sq.at_voxel(x, 5.5, 4.25, -1) == doctest::Approx(q(x, 5.5, 4.25)).epsilon(1e-3));
  }
  CHECK(s.at_voxel(-0.1, 2, 2, -9) == -9);
  CHECK(s.at_voxel(2, 2, 9.01, -9) == -9);
  const Volume r = resample_cubic(v, Affine4::identity(), g);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(std::abs(r[i] - v[i]) < 1e-9);
}

TEST_CASE("cubic B-spline batch sampling equals single sampling") {
  const Grid g({20, 20, 20}, Vec3(1.5, 1.5, 1.5));
  const Volume v = random_volume(g, 8);
  const CubicBSpline s(v);
  std::mt19937_64 eng(2);
  std::vector<double> x(300), y(300), z(300), out(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = -2.0 + 0.001 * (eng() % 32000);
    y[i] = 0.001 * (eng() % 28000);
    z[i] = 0.001 * (eng() % 28000);
  }
  s.sample_many(x, y, z, out, -3);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == s.sample(Vec3(x[i], y[i], z[i]), -3));
}

TEST_CASE("gaussian smoothing preserves constants and mean") {
  const Grid g({16, 16, 16}, Vec3(1, 1.5, 2));
  const Volume c(g, 5.0);
  const Volume sc = gaussian_smooth(c, 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(sc[i] == doctest::Approx(5.0).epsilon(1e-12));
  const auto taps = gaussian_taps(1.3);
  double sum = 0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(taps.size() == 2 * static_cast<std::size_t>(std::ceil(4 * 1.3)) + 1);
  const Volume v = random_volume(g, 5);
  const Volume s0 = gaussian_smooth(v, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(s0[i] == v[i]);
  CHECK_THROWS_AS(gaussian_smooth(v, -1.0), Error);
}

TEST_CASE("gradient of a linear ramp") {
  const Grid g({10, 10, 10}, Vec3(2, 1, 0.5));
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 p = g.world(i);
    d[i] = 3 * p[0] - p[1] + 2 * p[2];
  }
  const Volume v(g, d);
  const Vec3 gr = gradient_at(v, 5, 5, 5);
  CHECK((gr - Vec3(3, -1, 2)).norm() < 1e-9);
  const Vec3 edge = gradient_at(v, 0, 9, 0);
  CHECK((edge - Vec3(3, -1, 2)).norm() < 1e-9);
}

TEST_CASE("morphology and components") {
  const Grid g({11, 11, 11}, Vec3(1, 1, 1));
  BinaryMask m(g);
  m.set(g.index(5, 5, 5), true);
  const BinaryMask d = dilate(m);
  CHECK(d.count() == 27);
  CHECK(erode(d).count() == 1);
  BinaryMask two(g);
  for (int i = 0; i < 3; ++i) two.set(g.index(1 + i, 1, 1), true);
  two.set(g.index(8, 8, 8), true);
  const ComponentResult c = largest_component(two);
  CHECK(c.n_components == 2);
  CHECK(c.kept == 3);
  CHECK(c.discarded == 1);
  BinaryMask shell = dilate(m, 3);
  const BinaryMask hollow_core = erode(shell, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (hollow_core[i]) shell.set(i, false);
  }
  CHECK(fill_holes(shell).count() == dilate(m, 3).count());
  CHECK(boundary_voxels(d).size() == 26);
  CHECK((d.centroid() - g.world(5, 5, 5)).norm() < 1e-12);
}

TEST_CASE("percentile uses linear interpolation") {
  CHECK(percentile({1, 2, 3, 4}, 50) == doctest::Approx(2.5));
  CHECK(percentile({5, 1, 3}, 0) == 1);
  CHECK(percentile({5, 1, 3}, 100) == 5);
  CHECK(percentile({0, 10}, 98) == doctest::Approx(9.8));
  CHECK_THROWS_AS(percentile({}, 50), Error);
}
