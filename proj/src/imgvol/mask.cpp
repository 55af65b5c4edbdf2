#include "atrophy/imgvol/mask.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "atrophy/error.hpp"

namespace atrophy {

BinaryMask::BinaryMask(Grid grid) : grid_(std::move(grid)), bits_(grid_.size(), 0) {}

BinaryMask::BinaryMask(Grid grid, std::vector<std::uint8_t> bits)
    : grid_(std::move(grid)), bits_(std::move(bits)) {
  if (bits_.size() != grid_.size()) throw Error("mask length does not match grid");
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Vec3 BinaryMask::centroid() const {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) {
      const Index3 c = grid_.coords(i);
      sum += Vec3(static_cast<double>(c[0]), static_cast<double>(c[1]),
                  static_cast<double>(c[2]));
      ++n;
    }
  }
  if (n == 0) throw Error("centroid of an empty mask");
  return grid_.vox_to_world().apply(sum / static_cast<double>(n));
}

Volume BinaryMask::to_volume() const {
  std::vector<double> data(bits_.begin(), bits_.end());
  return Volume(grid_, std::move(data));
}

BinaryMask threshold_mask(const Volume& v, double threshold) {
  std::vector<std::uint8_t> bits(v.size());
  const auto d = v.data();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = d[i] > threshold ? 1 : 0;
  return BinaryMask(v.grid(), std::move(bits));
}

namespace {

// Separable 3-tap max or min filter along each axis.
std::vector<std::uint8_t> box_pass(const Grid& g, std::vector<std::uint8_t> in, bool dilate_op) {
  const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::int64_t strides[3] = {1, nx, nx * ny};
  const std::int64_t extent[3] = {nx, ny, nz};
  std::vector<std::uint8_t> out(in.size());
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t s = strides[axis];
    for (std::int64_t k = 0; k < nz; ++k) {
      for (std::int64_t j = 0; j < ny; ++j) {
        for (std::int64_t i = 0; i < nx; ++i) {
          const std::int64_t pos[3] = {i, j, k};
          const std::size_t idx = g.index(i, j, k);
          std::uint8_t v = in[idx];
          if (pos[axis] > 0) {
            v = dilate_op ? std::max(v, in[idx - s]) : std::min(v, in[idx - s]);
          }
          if (pos[axis] + 1 < extent[axis]) {
            v = dilate_op ? std::max(v, in[idx + s]) : std::min(v, in[idx + s]);
          }
          out[idx] = v;
        }
      }
    }
    std::swap(in, out);
  }
  return in;
}

}  // namespace

BinaryMask dilate(const BinaryMask& m, int iterations) {
  std::vector<std::uint8_t> bits(m.bits().begin(), m.bits().end());
  for (int it = 0; it < iterations; ++it) bits = box_pass(m.grid(), std::move(bits), true);
  return BinaryMask(m.grid(), std::move(bits));
}

BinaryMask erode(const BinaryMask& m, int iterations) {
  std::vector<std::uint8_t> bits(m.bits().begin(), m.bits().end());
  for (int it = 0; it < iterations; ++it) bits = box_pass(m.grid(), std::move(bits), false);
  return BinaryMask(m.grid(), std::move(bits));
}

namespace {

// 6-connected flood from `seed` over voxels where bits == value; labels the
// visited voxels with `label`. Returns the component size.
std::size_t flood(const Grid& g, std::span<const std::uint8_t> bits, std::uint8_t value,
                  std::vector<std::int32_t>& labels, std::size_t seed, std::int32_t label,
                  bool* touches_border) {
  std::deque<std::size_t> queue{seed};
  labels[seed] = label;
  std::size_t n = 0;
  const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    ++n;
    const Index3 c = g.coords(cur);
    if (touches_border != nullptr &&
        (c[0] == 0 || c[1] == 0 || c[2] == 0 || c[0] == nx - 1 || c[1] == ny - 1 ||
         c[2] == nz - 1)) {
      *touches_border = true;
    }
    const std::int64_t nb[6][3] = {{c[0] - 1, c[1], c[2]}, {c[0] + 1, c[1], c[2]},
                                   {c[0], c[1] - 1, c[2]}, {c[0], c[1] + 1, c[2]},
                                   {c[0], c[1], c[2] - 1}, {c[0], c[1], c[2] + 1}};
    for (const auto& p : nb) {
      if (!g.contains(p[0], p[1], p[2])) continue;
      const std::size_t ni = g.index(p[0], p[1], p[2]);
      if (labels[ni] == 0 && bits[ni] == value) {
        labels[ni] = label;
        queue.push_back(ni);
      }
    }
  }
  return n;
}

}  // namespace

ComponentResult largest_component(const BinaryMask& m) {
  const Grid& g = m.grid();
  std::vector<std::int32_t> labels(m.size(), 0);
  std::int32_t next = 0;
  std::int32_t best_label = 0;
  std::size_t best_size = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.bits()[i] && labels[i] == 0) {
      const std::size_t n = flood(g, m.bits(), 1, labels, i, ++next, nullptr);
      total += n;
      if (n > best_size) {
        best_size = n;
        best_label = next;
      }
    }
  }
  ComponentResult r;
  r.n_components = static_cast<std::size_t>(next);
  r.kept = best_size;
  r.discarded = total - best_size;
  std::vector<std::uint8_t> bits(m.size(), 0);
  if (best_label != 0) {
    for (std::size_t i = 0; i < m.size(); ++i) bits[i] = labels[i] == best_label ? 1 : 0;
  }
  r.mask = BinaryMask(g, std::move(bits));
  return r;
}

BinaryMask fill_holes(const BinaryMask& m) {
  const Grid& g = m.grid();
  std::vector<std::int32_t> labels(m.size(), 0);
  std::vector<std::uint8_t> bits(m.bits().begin(), m.bits().end());
  std::int32_t next = 0;
  std::vector<bool> is_hole{false};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.bits()[i] && labels[i] == 0) {
      bool border = false;
      flood(g, m.bits(), 0, labels, i, ++next, &border);
      is_hole.push_back(!border);
    }
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (labels[i] != 0 && is_hole[static_cast<std::size_t>(labels[i])]) bits[i] = 1;
  }
  return BinaryMask(g, std::move(bits));
}

std::vector<std::size_t> boundary_voxels(const BinaryMask& m) {
  const Grid& g = m.grid();
  std::vector<std::size_t> out;
  const auto bits = m.bits();
  for (std::int64_t k = 0; k < g.nz(); ++k) {
    for (std::int64_t j = 0; j < g.ny(); ++j) {
      for (std::int64_t i = 0; i < g.nx(); ++i) {
        const std::size_t idx = g.index(i, j, k);
        if (!bits[idx]) continue;
        const std::int64_t nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                       {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        bool edge = false;
        for (const auto& p : nb) {
          if (!g.contains(p[0], p[1], p[2]) || !bits[g.index(p[0], p[1], p[2])]) {
            edge = true;
            break;
          }
        }
        if (edge) out.push_back(idx);
      }
    }
  }
  return out;
}

}  // namespace atrophy
