#include <doctest.h>

#include <cmath>
#include <random>

#include "atrophy/error.hpp"
#include "atrophy/extract/extract.hpp"
#include "atrophy/imgvol/sampling.hpp"
#include "atrophy/phantom/phantom.hpp"
#include "atrophy/register/register.hpp"

using namespace atrophy;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = Vec3(2, 2, 2);
  return s;
}

struct Scan {
  Volume image;
  BinaryMask brain;
  BinaryMask skull;
  RegistrationInput input() const { return {&image, &brain, &skull}; }
};

Scan scan(double scale, const Affine4& pose) {
  const Phantom p = make_head_phantom(small_spec(), scale, pose);
  Scan s{p.image, p.brain_mask, {}};
  s.skull = derive_skull_mask(s.image, s.brain).mask;
  return s;
}

double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

// Rotation angle of the linear part and translation at `c` of a near-rigid residual.
void residual(const Affine4& e, const Vec3& c, double* angle, double* shift) {
  const Eigen::JacobiSVD<Mat3> svd(e.linear(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  *angle = std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
  *shift = (e.apply(c) - c).norm();
}

Affine4 random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1), t(-10.0, 10.0);
  Mat3 l = Mat3::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) l(i, j) += u(rng);
  return Affine4::from_parts(l, Vec3(t(rng), t(rng), t(rng)));
}

}  // namespace

TEST_CASE("affine parameters round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tr(-10, 10), rr(-0.3, 0.3), ss(-0.1, 0.1), kk(-0.1, 0.1);
  for (int n = 0; n < 500; ++n) {
    AffineParams p;
    p.center = Vec3(tr(rng), tr(rng), tr(rng)) * 5.0;
    p.t = Vec3(tr(rng), tr(rng), tr(rng));
    p.r = Vec3(rr(rng), rr(rng), rr(rng));
    p.s = Vec3(ss(rng), ss(rng), ss(rng));
    p.k = Vec3(kk(rng), kk(rng), kk(rng));
    const Affine4 m = p.to_matrix();
    REQUIRE(m.linear().determinant() > 0);
    const AffineParams q = AffineParams::from_matrix(m, p.center);
    for (int i = 0; i < AffineParams::kCount; ++i) REQUIRE(std::abs(q[i] - p[i]) < 1e-9);
  }
  AffineParams id;
  CHECK(max_abs(id.to_matrix().matrix() - Mat4::Identity()) == 0.0);
}

TEST_CASE("masked ncc") {
  const Grid g({50, 50, 40}, Vec3(1, 1, 1));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> a(g.size()), b(g.size()), w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
    w[i] = std::abs(n(rng));
  }
  const Volume va(g, a), vb(g, b), vw(g, w);
  CHECK(masked_ncc(va, va, vw) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> lin(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) lin[i] = 2.0 * a[i] + 5.0;
  CHECK(masked_ncc(va, Volume(g, lin), vw) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(masked_ncc(va, vb, Volume(g, 1.0))) < 0.02);
  CHECK_THROWS_AS(masked_ncc(Volume(g, 3.0), vb, vw), Error);
  CHECK_THROWS_AS(masked_ncc(va, vb, Volume(g, 0.0)), Error);
}

TEST_CASE("sqrt_affine") {
  CHECK(max_abs(sqrt_affine(Affine4::identity()).matrix() - Mat4::Identity()) < 1e-15);
  const Affine4 h = sqrt_affine(Affine4::translation(Vec3(2, -4, 6)));
  CHECK(max_abs(h.matrix() - Affine4::translation(Vec3(1, -2, 3)).matrix()) < 1e-12);
  std::mt19937_64 rng(21);
  for (int n = 0; n < 1000; ++n) {
    const Affine4 t = random_affine(rng);
    const Affine4 r = sqrt_affine(t);
    REQUIRE(max_abs((r * r).matrix() - t.matrix()) < 1e-9);
  }
}

TEST_CASE("halfway pushes") {
  const Grid g({30, 30, 30}, Vec3(1, 1, 1));
  std::vector<double> ramp(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) ramp[i] = g.world(i)[0] + 0.5 * g.world(i)[1];
  const Volume a(g, ramp);
  const Halfway id = to_halfway(a, a, Affine4::identity(), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    REQUIRE(std::abs(id.a[i] - a[i]) < 1e-9);
    REQUIRE(std::abs(id.b[i] - a[i]) < 1e-9);
  }
  const Affine4 fwd = Affine4::translation(Vec3(2, 0, 0));
  const Halfway hw = to_halfway(a, a, fwd, g);
  CHECK(max_abs(hw.half.matrix() - Affine4::translation(Vec3(1, 0, 0)).matrix()) < 1e-12);
  CHECK(hw.a.at(15, 15, 15) == doctest::Approx(a.at(15, 15, 15) - 1.0));
  CHECK(hw.b.at(15, 15, 15) == doctest::Approx(a.at(15, 15, 15) + 1.0));
  // The two pushes compose to the full forward transform.
  std::mt19937_64 rng(8);
  for (int n = 0; n < 50; ++n) {
    const Affine4 t = random_affine(rng);
    const Halfway h = to_halfway(a, a, t, g);
    REQUIRE(max_abs((h.push_b.inverse() * h.push_a).matrix() - t.matrix()) < 1e-9);
  }
}

TEST_CASE("self registration") {
  const Scan s = scan(1.0, Affine4::identity());
  const RegistrationResult r = register_affine(s.input(), s.input());
  double angle = 0, shift = 0;
  residual(r.forward, s.brain.centroid(), &angle, &shift);
  CHECK(angle < 0.001);
  CHECK(shift < 0.05);
  CHECK(r.cost_final <= -0.999);
  for (const LevelTrace& l : r.pyramid_trace) CHECK(l.cost_final <= l.cost_initial);
}

TEST_CASE("recovers a known rigid motion") {
  const Scan fixed = scan(1.0, Affine4::identity());
  const Affine4 pose =
      rigid_transform(Vec3(0.05, 0.0, 0.0), Vec3(4, 0, 0), small_spec().center());
  const Scan moving = scan(1.0, pose);
  const RegistrationResult r = register_affine(fixed.input(), moving.input());
  double angle = 0, shift = 0;
  residual(pose.inverse() * r.forward, fixed.brain.centroid(), &angle, &shift);
  CHECK(angle < 0.005);
  CHECK(shift < 0.2);
  for (const LevelTrace& l : r.pyramid_trace) CHECK(l.cost_final <= l.cost_initial);
}

TEST_CASE("symmetric registration inverts under swap") {
  const Affine4 pose = rigid_transform(Vec3(0.0, 0.02, -0.01), Vec3(1, -1, 2), small_spec().center());
  const Scan a = scan(1.0, Affine4::identity());
  const Scan b = scan(0.99, pose);
  const SymmetricRegistration ab = register_symmetric(a.input(), b.input());
  const SymmetricRegistration ba = register_symmetric(b.input(), a.input());
  CHECK(max_abs((ab.forward * ba.forward).matrix() - Mat4::Identity()) < 1e-6);
  // Atrophy does not leak into the recovered scale.
  const double scale = std::cbrt(ab.forward.linear().determinant());
  CHECK(std::abs(scale - 1.0) < 0.004);
}

TEST_CASE("registration contracts") {
  const Scan s = scan(1.0, Affine4::identity());
  RegistrationInput bad = s.input();
  const BinaryMask other(Grid({10, 10, 10}, Vec3(1, 1, 1)));
  bad.brain = &other;
  CHECK_THROWS_AS(register_affine(bad, s.input()), Error);
  RegistrationOptions o;
  o.pyramid = {};
  CHECK_THROWS_AS(register_affine(s.input(), s.input(), o), Error);
}
