#include "atrophy/segment/tissue.hpp"

#include <algorithm>

#include "atrophy/error.hpp"

namespace atrophy {

TissueSegmentation::TissueSegmentation(Grid grid, std::vector<std::uint8_t> labels)
    : grid_(std::move(grid)), labels_(std::move(labels)) {
  if (labels_.size() != grid_.size()) throw Error("segmentation length does not match grid");
  for (auto l : labels_) {
    if (l > kWM) throw Error("segmentation label outside {0,1,2,3}");
  }
}

std::size_t TissueSegmentation::count(Tissue t) const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), t));
}

BinaryMask TissueSegmentation::brain_tissue() const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = is_brain_tissue(labels_[i]) ? 1 : 0;
  return BinaryMask(grid_, std::move(bits));
}

BinaryMask TissueSegmentation::of(Tissue t) const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels_[i] == t ? 1 : 0;
  return BinaryMask(grid_, std::move(bits));
}

}  // namespace atrophy
