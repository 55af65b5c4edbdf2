#pragma once

#include <array>
#include <optional>
#include <vector>

#include "atrophy/imgvol/mask.hpp"
#include "atrophy/kernels/kernels.hpp"
#include "atrophy/segment/tissue.hpp"

namespace atrophy {

/// 12-parameter affine about `center`:
///   x' = Rz Ry Rx diag(exp s) K (x - center) + center + t
/// with K unit upper-triangular holding the shears (xy, xz, yz).
struct AffineParams {
  Vec3 t = Vec3::Zero();
  Vec3 r = Vec3::Zero();
  Vec3 s = Vec3::Zero();
  Vec3 k = Vec3::Zero();
  Vec3 center = Vec3::Zero();

  static constexpr int kCount = 12;
  /// 0-2 translation, 3-5 rotation, 6-8 log-scale, 9-11 shear.
  double& operator[](int i);
  double operator[](int i) const;

  Affine4 to_matrix() const;
  /// Inverse of to_matrix for transforms with a positive determinant.
  static AffineParams from_matrix(const Affine4& m, const Vec3& center);
};

/// Weighted normalized cross-correlation in [-1, 1].
double weighted_ncc(const kernels::Moments& m);

/// -NCC of a and b under `weight` (shared grid). Throws on zero variance.
double masked_ncc(const Volume& a, const Volume& b, const Volume& weight);

struct RegistrationOptions {
  double brain_weight = 1.0;
  double skull_weight = 4.0;
  /// Skull weight voxels within this many dilations of the fixed brain mask
  /// are dropped, so the moving brain edge cannot leak into the skull term.
  int skull_brain_clearance = 2;
  std::vector<int> pyramid{4, 2, 1};
  /// Level images are smoothed with sigma = max(factor / 2, min_sigma_vox)
  /// voxels before subsampling.
  double min_sigma_vox = 1.0;
  /// Translation mm, rotation rad, log-scale, shear.
  std::array<double, 4> initial_steps{2.0, 0.05, 0.02, 0.02};
  std::array<double, 4> tolerances{0.01, 1e-4, 1e-4, 1e-4};
  int max_sweeps = 50;
  int golden_iterations = 7;
  /// Starting transform; by default a translation aligning the brain centroids.
  std::optional<Affine4> initial;
};

struct LevelTrace {
  int factor = 1;
  double cost_initial = 0.0;
  double cost_final = 0.0;
  int sweeps = 0;
  int evaluations = 0;
};

struct RegistrationResult {
  Affine4 forward;  // fixed world -> moving world: fixed(x) ~ moving(forward x)
  AffineParams params;
  double cost_final = 0.0;
  int iterations = 0;  // total sweeps over all levels
  std::vector<LevelTrace> pyramid_trace;
};

struct RegistrationInput {
  const Volume* image = nullptr;
  const BinaryMask* brain = nullptr;
  const BinaryMask* skull = nullptr;  // may be null: brain term only
};

/// Minimizes the weighted combination of masked NCC over the dilated fixed
/// brain and dilated fixed skull by pyramid coordinate descent.
RegistrationResult register_affine(const RegistrationInput& fixed, const RegistrationInput& moving,
                                   const RegistrationOptions& opts = {});

struct SymmetricRegistration {
  Affine4 forward;  // A world -> B world
  RegistrationResult a_to_b;
  RegistrationResult b_to_a;
};

/// forward = sqrt(T_ab * T_ba^-1), so swapping the inputs inverts it.
SymmetricRegistration register_symmetric(const RegistrationInput& a, const RegistrationInput& b,
                                         const RegistrationOptions& opts = {});

/// Principal square root of an affine: H * H = t.
Affine4 sqrt_affine(const Affine4& t);

struct Halfway {
  Affine4 half;    // H = sqrt(forward)
  Affine4 push_a;  // resample A with this: H
  Affine4 push_b;  // resample B with this: H * forward^-1
  Volume a;
  Volume b;
};

/// Both scans mapped onto `target` in the halfway space.
Halfway to_halfway(const Volume& a, const Volume& b, const Affine4& forward, const Grid& target);

}  // namespace atrophy
