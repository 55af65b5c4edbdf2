#include "atrophy/imgvol/volume.hpp"

#include <cmath>

#include "atrophy/error.hpp"

namespace atrophy {

Volume::Volume(Grid grid, double fill) : grid_(std::move(grid)), data_(grid_.size(), fill) {
  if (!std::isfinite(fill)) throw Error("volume fill value must be finite");
}

Volume::Volume(Grid grid, std::vector<double> data)
    : grid_(std::move(grid)), data_(std::move(data)) {
  if (data_.size() != grid_.size()) throw Error("volume data length does not match grid");
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error("volume contains non-finite values");
  }
}

VectorField::VectorField(Grid grid, std::vector<std::array<double, 3>> vectors)
    : grid_(std::move(grid)), vectors_(std::move(vectors)) {
  if (vectors_.size() != grid_.size()) throw Error("vector field length does not match grid");
  for (const auto& v : vectors_) {
    if (!(std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]))) {
      throw Error("vector field contains non-finite values");
    }
  }
}

}  // namespace atrophy
