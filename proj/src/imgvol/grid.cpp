#include "atrophy/imgvol/grid.hpp"

#include <cmath>
#include <string>

#include "atrophy/error.hpp"

namespace atrophy {

Grid::Grid(const Index3& dims, const Vec3& spacing, const Vec3& origin) : dims_(dims) {
  if (!(spacing.allFinite() && spacing.minCoeff() > 0.0)) {
    throw Error("grid spacing must be finite and positive");
  }
  vox_to_world_ = Affine4::from_parts(spacing.asDiagonal(), origin);
  spacing_ = spacing;
  validate();
  world_to_vox_ = vox_to_world_.inverse();
}

Grid::Grid(const Index3& dims, const Affine4& vox_to_world)
    : dims_(dims), vox_to_world_(vox_to_world) {
  const Mat3 lin = vox_to_world_.linear();
  spacing_ = Vec3(lin.col(0).norm(), lin.col(1).norm(), lin.col(2).norm());
  validate();
  world_to_vox_ = vox_to_world_.inverse();
}

void Grid::validate() const {
  for (auto d : dims_) {
    if (d < 2) throw Error("grid dims must be at least 2 along every axis");
  }
  if (!(spacing_.allFinite() && spacing_.minCoeff() > 0.0)) {
    throw Error("grid spacing must be finite and positive");
  }
  if (!(vox_to_world_.linear().determinant() > 0.0)) {
    throw Error("grid affine must have a positive determinant");
  }
}

double Grid::voxel_volume() const { return std::abs(vox_to_world_.linear().determinant()); }

Index3 Grid::coords(std::size_t idx) const noexcept {
  const auto i = static_cast<std::int64_t>(idx);
  return {i % dims_[0], (i / dims_[0]) % dims_[1], i / (dims_[0] * dims_[1])};
}

Vec3 Grid::world(std::int64_t i, std::int64_t j, std::int64_t k) const {
  return vox_to_world_.apply(Vec3(static_cast<double>(i), static_cast<double>(j),
                                  static_cast<double>(k)));
}

Vec3 Grid::world(std::size_t idx) const {
  const Index3 c = coords(idx);
  return world(c[0], c[1], c[2]);
}

bool Grid::matches(const Grid& other, double tol) const {
  if (dims_ != other.dims_) return false;
  if ((spacing_ - other.spacing_).cwiseAbs().maxCoeff() > tol) return false;
  return vox_to_world_.max_abs_diff(other.vox_to_world_) <= tol;
}

void require_pipeline_grid(const Grid& grid) {
  for (auto d : grid.dims()) {
    if (d < 8) {
      throw Error("volume dims must be at least 8 along every axis (got " +
                  std::to_string(d) + ")");
    }
  }
}

}  // namespace atrophy
