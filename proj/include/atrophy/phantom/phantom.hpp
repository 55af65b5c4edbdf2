#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "atrophy/imgvol/mask.hpp"
#include "atrophy/segment/tissue.hpp"

namespace atrophy {

/// Geometric class of a phantom point, finer than the tissue labels.
enum class HeadClass : std::uint8_t {
  Background = 0,
  Csf = 1,
  Gm = 2,
  Wm = 3,
  Gap = 4,  // between the brain surface and the inner skull
  Skull = 5,
  Scalp = 6,
};

struct PhantomIntensities {
  double background = 0.0;
  double csf = 45.0;
  double gm = 80.0;
  double wm = 110.0;
  double skull = 55.0;
  double scalp = 100.0;
};

/// Concentric head shells. Every shell boundary is a level set of
///   rho(x) = |u| / (1 + shape_modulation * P(u / |u|)),  u = (x - center) / axis_ratios
/// with P a fixed cubic angular profile bounded by 1, so radii below are in
/// rho units. shape_modulation = 0 gives plain ellipsoids; the default breaks
/// every continuous rotational symmetry so orientation is observable.
struct PhantomSpec {
  Index3 dims{128, 128, 128};
  Vec3 spacing{1.5, 1.5, 1.5};
  double brain_radius_mm = 55.0;
  Vec3 axis_ratios{1.0, 1.1, 0.9};
  double shape_modulation = 0.1;
  /// Radial thickness fractions of the brain, outside in: csf, gm, wm.
  std::array<double, 3> layer_fracs{0.1, 0.4, 0.5};
  double skull_inner_offset_mm = 6.0;
  double skull_thickness_mm = 5.0;
  double scalp_thickness_mm = 5.0;
  PhantomIntensities intensities;
  std::uint64_t seed = 0;

  Grid grid() const;
  /// Grid center in world mm; also the center of the shells.
  Vec3 center() const;
  /// Shape radius of a world point.
  double rho(const Vec3& p_world) const;
  /// Throws atrophy::Error when the geometry or intensity ordering is invalid.
  void validate() const;
};

struct Phantom {
  Volume image;
  BinaryMask brain_mask;
  TissueSegmentation labels;
  std::vector<HeadClass> classes;  // majority class per voxel
};

struct PhantomTruth {
  double brain_volume_mm3 = 0.0;
  double pbvc_true_percent = 0.0;
  double applied_scale = 1.0;
};

struct AtrophyPair {
  Phantom t0;
  Phantom t1;
  PhantomTruth truth;
};

/// Class at a world point for the given brain scale (1 = unscaled).
HeadClass classify_point(const PhantomSpec& spec, const Vec3& p_world, double brain_scale = 1.0);

/// Voxel values are the mean over a 3x3x3 sub-grid; masks and labels use the
/// majority sub-sample. `pose` moves the whole head rigidly (the image at x
/// shows the head at pose^-1 x), rendered exactly rather than resampled.
Phantom make_head_phantom(const PhantomSpec& spec, double brain_scale = 1.0,
                          const Affine4& pose = Affine4::identity());

/// Closed-form volume enclosed by the brain surface.
double analytic_brain_volume(const PhantomSpec& spec, double brain_scale = 1.0);

/// t1 has every brain radius multiplied by s; skull and scalp are unchanged.
/// Requires 0.9 <= s <= 1.1.
AtrophyPair apply_atrophy(const PhantomSpec& spec, double s);

/// Resample by `rigid` (cubic B-spline), multiply by 1 + bias_amp * g, add N(0, noise_sigma^2).
/// g(u, v, w) = cos(pi u) cos(pi v) cos(pi w) with u, v, w in [-1, 1] across
/// the field of view.
Volume apply_acquisition(const Volume& v, double noise_sigma, double bias_amp,
                         const Affine4& rigid, std::uint64_t seed);

/// Rotation (det +1) plus translation, within `tol` under polar decomposition.
bool is_rigid(const Affine4& t, double tol = 1e-6);

/// Rotation about x, then y, then z (R = Rz Ry Rx), about `center`, then
/// translation.
Affine4 rigid_transform(const Vec3& rotation_rad, const Vec3& translation_mm,
                        const Vec3& center = Vec3::Zero());

/// Standard normal deviates from std::mt19937_64 via Box-Muller. The engine
/// output is fixed by the standard, so the stream is identical across
/// platforms, unlike std::normal_distribution.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed);
  double next();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  double uniform_open();
};

}  // namespace atrophy
