#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "atrophy/imgvol/affine.hpp"

namespace atrophy {

using Index3 = std::array<std::int64_t, 3>;

/// Sampling lattice of a volume: voxel counts plus the voxel-to-world map.
///
/// Voxel (i, j, k) sits at world position vox_to_world * (i, j, k, 1) in mm.
/// Linear storage index is i + nx * (j + ny * k), x fastest. Spacing is the
/// column norm of the affine's linear part.
class Grid {
 public:
  Grid() = default;
  /// Axis-aligned grid with the given spacing and voxel (0,0,0) at `origin`.
  Grid(const Index3& dims, const Vec3& spacing, const Vec3& origin = Vec3::Zero());
  Grid(const Index3& dims, const Affine4& vox_to_world);

  const Index3& dims() const noexcept { return dims_; }
  std::int64_t nx() const noexcept { return dims_[0]; }
  std::int64_t ny() const noexcept { return dims_[1]; }
  std::int64_t nz() const noexcept { return dims_[2]; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Affine4& vox_to_world() const noexcept { return vox_to_world_; }
  const Affine4& world_to_vox() const noexcept { return world_to_vox_; }
  double voxel_volume() const;

  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
  }
  Index3 coords(std::size_t idx) const noexcept;
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  Vec3 world(std::int64_t i, std::int64_t j, std::int64_t k) const;
  Vec3 world(std::size_t idx) const;
  Vec3 to_voxel(const Vec3& world) const { return world_to_vox_.apply(world); }

  /// Same dims, spacing within `tol`, affine entries within `tol`.
  bool matches(const Grid& other, double tol = 1e-6) const;

 private:
  void validate() const;

  Index3 dims_{0, 0, 0};
  Vec3 spacing_ = Vec3::Ones();
  Affine4 vox_to_world_;
  Affine4 world_to_vox_;
};

/// Dims of at least 8 on every axis; the smallest volume the pipeline accepts.
void require_pipeline_grid(const Grid& grid);

}  // namespace atrophy
