#pragma once

#include <cstdint>
#include <vector>

#include "atrophy/imgvol/mask.hpp"

namespace atrophy {

enum Tissue : std::uint8_t { kBG = 0, kCSF = 1, kGM = 2, kWM = 3 };

/// Per-voxel tissue code in {BG, CSF, GM, WM}.
class TissueSegmentation {
 public:
  TissueSegmentation() = default;
  TissueSegmentation(Grid grid, std::vector<std::uint8_t> labels);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::uint8_t operator[](std::size_t i) const noexcept { return labels_[i]; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::size_t count(Tissue t) const noexcept;
  /// GM or WM.
  BinaryMask brain_tissue() const;
  BinaryMask of(Tissue t) const;

 private:
  Grid grid_;
  std::vector<std::uint8_t> labels_;
};

inline bool is_brain_tissue(std::uint8_t l) noexcept { return l == kGM || l == kWM; }

}  // namespace atrophy
