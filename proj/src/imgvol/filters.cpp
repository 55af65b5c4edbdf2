#include "atrophy/imgvol/filters.hpp"

#include <cmath>

#include "atrophy/error.hpp"
#include "atrophy/kernels/kernels.hpp"

namespace atrophy {

std::vector<double> gaussian_taps(double sigma_vox) {
  if (!(sigma_vox > 0.0) || !std::isfinite(sigma_vox)) {
    throw Error("gaussian_taps: sigma must be positive and finite");
  }
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_vox));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double x = static_cast<double>(k) / sigma_vox;
    taps[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * x * x);
    sum += taps[static_cast<std::size_t>(k + radius)];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

Volume gaussian_smooth_vox(const Volume& v, const Vec3& sigma_vox) {
  for (int a = 0; a < 3; ++a) {
    if (!(sigma_vox[a] >= 0.0) || !std::isfinite(sigma_vox[a])) {
      throw Error("gaussian_smooth: sigma must be non-negative");
    }
  }
  const auto& k = kernels::active();
  std::vector<double> cur(v.data().begin(), v.data().end());
  std::vector<double> next(cur.size());
  for (int a = 0; a < 3; ++a) {
    if (sigma_vox[a] == 0.0) continue;
    const auto taps = gaussian_taps(sigma_vox[a]);
    const int radius = static_cast<int>(taps.size() / 2);
    k.convolve(cur.data(), next.data(), v.grid().dims(), a, taps.data(), radius);
    cur.swap(next);
  }
  return Volume(v.grid(), std::move(cur));
}

Volume gaussian_smooth(const Volume& v, double sigma_mm) {
  if (!(sigma_mm >= 0.0) || !std::isfinite(sigma_mm)) {
    throw Error("gaussian_smooth: sigma must be non-negative");
  }
  if (sigma_mm == 0.0) return v;
  const Vec3& sp = v.grid().spacing();
  return gaussian_smooth_vox(v, Vec3(sigma_mm / sp[0], sigma_mm / sp[1], sigma_mm / sp[2]));
}

namespace {

Vec3 index_gradient(const Volume& v, std::int64_t i, std::int64_t j, std::int64_t k) {
  const Index3& d = v.grid().dims();
  const std::int64_t c[3] = {i, j, k};
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    std::int64_t lo[3] = {i, j, k};
    std::int64_t hi[3] = {i, j, k};
    double h = 2.0;
    if (c[a] == 0) {
      hi[a] = 1;
      h = 1.0;
    } else if (c[a] == d[a] - 1) {
      lo[a] = c[a] - 1;
      h = 1.0;
    } else {
      lo[a] = c[a] - 1;
      hi[a] = c[a] + 1;
    }
    g[a] = (v.at(hi[0], hi[1], hi[2]) - v.at(lo[0], lo[1], lo[2])) / h;
  }
  return g;
}

Mat3 index_to_world_gradient(const Grid& g) {
  return g.vox_to_world().linear().inverse().transpose();
}

}  // namespace

Vec3 gradient_at(const Volume& v, std::int64_t i, std::int64_t j, std::int64_t k) {
  return index_to_world_gradient(v.grid()) * index_gradient(v, i, j, k);
}

VectorField gradient(const Volume& v) {
  const Grid& g = v.grid();
  if (g.nx() < 3 || g.ny() < 3 || g.nz() < 3) {
    throw Error("gradient: at least 3 voxels per axis required");
  }
  const Mat3 j = index_to_world_gradient(g);
  std::vector<std::array<double, 3>> out(g.size());
  for (std::int64_t z = 0; z < g.nz(); ++z) {
    for (std::int64_t y = 0; y < g.ny(); ++y) {
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        const Vec3 w = j * index_gradient(v, x, y, z);
        out[g.index(x, y, z)] = {w[0], w[1], w[2]};
      }
    }
  }
  return VectorField(g, std::move(out));
}

}  // namespace atrophy
