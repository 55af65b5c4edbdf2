#pragma once

#include <filesystem>
#include <vector>

#include "atrophy/imgvol/mask.hpp"

namespace atrophy {

struct SurfacePoint {
  std::size_t index = 0;  // linear voxel index
  Vec3 position = Vec3::Zero();  // world mm
  Vec3 normal = Vec3::Zero();  // unit, outward; zero until estimated
};

/// Ascending linear voxel index.
struct SurfacePointSet {
  std::vector<SurfacePoint> points;
  std::size_t dropped = 0;  // points removed for a vanishing gradient
};

/// Threshold at frac * p98 of the nonzero intensities, keep the largest
/// 6-connected component, close with a 3x3x3 box, fill holes.
BinaryMask threshold_brain_extract(const Volume& v, double frac = 0.35);

struct ExternalMask {
  BinaryMask mask;
  double discarded_fraction = 0.0;  // foreground share dropped outside the largest component
};

/// Nonzero voxels become foreground; only the largest component is kept.
/// The file grid must match `expected` (dims exactly, spacing within 1e-3).
ExternalMask load_external_mask(const std::filesystem::path& path, const Grid& expected);

SurfacePointSet mask_boundary(const BinaryMask& mask);

/// Normal = -grad(smoothed mask) / |.|, evaluated at each point.
SurfacePointSet estimate_normals(const BinaryMask& mask, const SurfacePointSet& pts,
                                 double sigma_mm = 1.0);

struct SkullOptions {
  double max_distance_mm = 30.0;
  double step_mm = 0.5;
  double normal_sigma_mm = 1.0;
  double rise_ratio = 1.2;
  /// The minimum is floored at this fraction of the in-brain 98th percentile
  /// before the rise test.
  double floor_fraction = 0.5;
  std::size_t min_points = 100;
};

/// Ray sample offsets 0, step, ..., max_distance.
std::vector<double> ray_offsets(const SkullOptions& opts = {});

struct SkullResult {
  BinaryMask mask;
  std::vector<Vec3> points;  // accepted inner-skull points, world mm
  std::size_t n_rays = 0;
};

/// Inner-skull mask from rays cast outward along the brain surface normals.
SkullResult derive_skull_mask(const Volume& v, const BinaryMask& brain,
                              const SkullOptions& opts = {});

}  // namespace atrophy
