#pragma once

#include <span>
#include <vector>

#include "atrophy/imgvol/mask.hpp"
#include "atrophy/imgvol/volume.hpp"
#include "atrophy/kernels/kernels.hpp"

namespace atrophy {

/// Trilinear value at a world point; `oob` outside the grid.
double trilinear_sample(const Volume& v, const Vec3& p_world, double oob = 0.0);

/// Batch version over world points, through the active SIMD kernel.
void trilinear_sample_many(const Volume& v, std::span<const double> wx,
                           std::span<const double> wy, std::span<const double> wz,
                           std::span<double> out, double oob = 0.0);

/// Output voxel i holds v sampled at t^-1 * world(i). Throws on a singular t.
Volume resample(const Volume& v, const Affine4& t, const Grid& target, double oob = 0.0);

/// Nearest-neighbor resampling for label images; out-of-grid voxels get
/// `oob`.
std::vector<std::uint8_t> resample_labels(std::span<const std::uint8_t> labels,
                                          const Grid& source, const Affine4& t,
                                          const Grid& target, std::uint8_t oob = 0);
BinaryMask resample_mask(const BinaryMask& m, const Affine4& t, const Grid& target);

/// Composite 3x4 map taking `from` voxel indices through world transform t to
/// `to` voxel indices: to.world_to_vox * t * from.vox_to_world.
kernels::Affine34 index_map(const Grid& from, const Affine4& t, const Grid& to);

/// Kernel view over a volume's storage.
kernels::SampleSource sample_source(const Volume& v);

}  // namespace atrophy
