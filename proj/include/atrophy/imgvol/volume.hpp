#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "atrophy/imgvol/grid.hpp"

namespace atrophy {

/// Scalar image on a Grid. Values are stored as double; integer and float32
/// file data is promoted on load.
class Volume {
 public:
  Volume() = default;
  Volume(Grid grid, double fill);
  /// Throws atrophy::Error on a length mismatch or non-finite values.
  Volume(Grid grid, std::vector<double> data);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return data_[grid_.index(i, j, k)];
  }

 private:
  Grid grid_;
  std::vector<double> data_;
};

/// One world-space 3-vector per voxel.
class VectorField {
 public:
  VectorField() = default;
  VectorField(Grid grid, std::vector<std::array<double, 3>> vectors);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const std::array<double, 3>> vectors() const noexcept { return vectors_; }
  Vec3 at(std::size_t i) const {
    return {vectors_[i][0], vectors_[i][1], vectors_[i][2]};
  }

 private:
  Grid grid_;
  std::vector<std::array<double, 3>> vectors_;
};

}  // namespace atrophy
