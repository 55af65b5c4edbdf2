#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atrophy/imgvol/volume.hpp"

namespace atrophy {

/// Binary voxel mask. Stored as one byte per voxel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Grid grid);
  BinaryMask(Grid grid, std::vector<std::uint8_t> bits);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t i, bool on) noexcept { bits_[i] = on ? 1 : 0; }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }
  /// World-space centroid of the foreground voxels.
  Vec3 centroid() const;
  Volume to_volume() const;

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

/// Mask of voxels whose value is strictly greater than `threshold`.
BinaryMask threshold_mask(const Volume& v, double threshold);

/// 3x3x3 box dilation / erosion, `iterations` times. Neighbors outside the
/// grid are ignored.
BinaryMask dilate(const BinaryMask& m, int iterations = 1);
BinaryMask erode(const BinaryMask& m, int iterations = 1);

struct ComponentResult {
  BinaryMask mask;
  std::size_t n_components = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;
};

/// Largest 6-connected foreground component. Ties go to the component whose
/// lowest linear index is smallest.
ComponentResult largest_component(const BinaryMask& m);

/// Fill background regions that are not 6-connected to the grid border.
BinaryMask fill_holes(const BinaryMask& m);

/// Foreground voxels that have at least one 6-neighbor in the background
/// (out-of-grid neighbors count as background). Ascending linear index.
std::vector<std::size_t> boundary_voxels(const BinaryMask& m);

}  // namespace atrophy
