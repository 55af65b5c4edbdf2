#pragma once

#include <span>

#include "atrophy/imgvol/volume.hpp"

namespace atrophy {

/// Cubic B-spline interpolant of a volume. Coefficients come from the
/// exact recursive prefilter with mirror boundaries, so the interpolant
/// passes through every voxel value.
class CubicBSpline {
 public:
  explicit CubicBSpline(const Volume& v);

  const Grid& grid() const noexcept { return coeff_.grid(); }
  const Volume& coefficients() const noexcept { return coeff_; }

  /// Value at a world point; `oob` outside [0, n-1] on any voxel axis.
  double sample(const Vec3& p_world, double oob = 0.0) const;
  void sample_many(std::span<const double> wx, std::span<const double> wy,
                   std::span<const double> wz, std::span<double> out, double oob = 0.0) const;

  /// Value at continuous voxel coordinates.
  double at_voxel(double x, double y, double z, double oob) const;

 private:
  Volume coeff_;
};

/// resample() with cubic B-spline interpolation: output voxel i holds v at
/// t^-1 * world(i).
Volume resample_cubic(const Volume& v, const Affine4& t, const Grid& target, double oob = 0.0);

}  // namespace atrophy
