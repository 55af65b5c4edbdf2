#pragma once

#include "atrophy/imgvol/volume.hpp"

namespace atrophy {

/// Normalized sampled Gaussian with radius ceil(4 sigma) taps on each side.
std::vector<double> gaussian_taps(double sigma_vox);

/// Separable Gaussian, sigma in mm converted per axis through the spacing,
/// kernel truncated at 4 sigma, borders replicated. sigma_mm == 0 returns
/// the input unchanged; negative sigma throws.
Volume gaussian_smooth(const Volume& v, double sigma_mm);

/// Same as gaussian_smooth but with an explicit per-axis sigma in voxels.
Volume gaussian_smooth_vox(const Volume& v, const Vec3& sigma_vox);

/// Central differences in world units (mm^-1), one-sided at the borders.
/// Requires at least 3 voxels along each axis.
VectorField gradient(const Volume& v);

/// Index-space central-difference gradient at a single voxel, identical to
/// what gradient() stores there but converted to world units.
Vec3 gradient_at(const Volume& v, std::int64_t i, std::int64_t j, std::int64_t k);

}  // namespace atrophy
