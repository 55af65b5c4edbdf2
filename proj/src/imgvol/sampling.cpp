#include "atrophy/imgvol/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "atrophy/error.hpp"

namespace atrophy {

kernels::SampleSource sample_source(const Volume& v) {
  return {v.data().data(), v.grid().nx(), v.grid().ny(), v.grid().nz()};
}

kernels::Affine34 index_map(const Grid& from, const Affine4& t, const Grid& to) {
  const Mat4 m = to.world_to_vox().matrix() * t.matrix() * from.vox_to_world().matrix();
  kernels::Affine34 out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      double x = m(r, c);
      // Composing a grid's affine with its inverse leaves rounding residue;
      // snap it so lattice-aligned maps stay exactly on voxel centers.
      const double n = std::nearbyint(x);
      if (std::abs(x - n) < 1e-12) x = n;
      out[static_cast<std::size_t>(4 * r + c)] = x;
    }
  }
  return out;
}

double trilinear_sample(const Volume& v, const Vec3& p_world, double oob) {
  const Vec3 p = v.grid().to_voxel(p_world);
  const kernels::Affine34 id{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  double out = oob;
  kernels::active().sample(sample_source(v), id, &p[0], &p[1], &p[2], 1, oob, &out);
  return out;
}

void trilinear_sample_many(const Volume& v, std::span<const double> wx,
                           std::span<const double> wy, std::span<const double> wz,
                           std::span<double> out, double oob) {
  const std::size_t n = out.size();
  if (wx.size() != n || wy.size() != n || wz.size() != n) {
    throw Error("trilinear_sample_many: coordinate and output lengths differ");
  }
  const Mat4& w2v = v.grid().world_to_vox().matrix();
  kernels::Affine34 m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) m[static_cast<std::size_t>(4 * r + c)] = w2v(r, c);
  }
  kernels::active().sample(sample_source(v), m, wx.data(), wy.data(), wz.data(), n, oob,
                           out.data());
}

Volume resample(const Volume& v, const Affine4& t, const Grid& target, double oob) {
  const Affine4 inv = t.inverse();
  const kernels::Affine34 m = index_map(target, inv, v.grid());
  const auto src = sample_source(v);
  const auto& k = kernels::active();
  const std::int64_t nx = target.nx();
  std::vector<double> xs(static_cast<std::size_t>(nx));
  for (std::int64_t i = 0; i < nx; ++i) xs[static_cast<std::size_t>(i)] = static_cast<double>(i);
  std::vector<double> ys(xs.size()), zs(xs.size());
  std::vector<double> out(target.size());
  for (std::int64_t z = 0; z < target.nz(); ++z) {
    std::fill(zs.begin(), zs.end(), static_cast<double>(z));
    for (std::int64_t y = 0; y < target.ny(); ++y) {
      std::fill(ys.begin(), ys.end(), static_cast<double>(y));
      k.sample(src, m, xs.data(), ys.data(), zs.data(), xs.size(), oob,
               out.data() + target.index(0, y, z));
    }
  }
  return Volume(target, std::move(out));
}

std::vector<std::uint8_t> resample_labels(std::span<const std::uint8_t> labels,
                                          const Grid& source, const Affine4& t,
                                          const Grid& target, std::uint8_t oob) {
  if (labels.size() != source.size()) throw Error("resample_labels: label length mismatch");
  const kernels::Affine34 m = index_map(target, t.inverse(), source);
  std::vector<std::uint8_t> out(target.size(), oob);
  for (std::int64_t z = 0; z < target.nz(); ++z) {
    for (std::int64_t y = 0; y < target.ny(); ++y) {
      for (std::int64_t x = 0; x < target.nx(); ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y),
                     fz = static_cast<double>(z);
        const double px = m[0] * fx + m[1] * fy + m[2] * fz + m[3];
        const double py = m[4] * fx + m[5] * fy + m[6] * fz + m[7];
        const double pz = m[8] * fx + m[9] * fy + m[10] * fz + m[11];
        const auto ix = static_cast<std::int64_t>(std::floor(px + 0.5));
        const auto iy = static_cast<std::int64_t>(std::floor(py + 0.5));
        const auto iz = static_cast<std::int64_t>(std::floor(pz + 0.5));
        if (!source.contains(ix, iy, iz)) continue;
        out[target.index(x, y, z)] = labels[source.index(ix, iy, iz)];
      }
    }
  }
  return out;
}

BinaryMask resample_mask(const BinaryMask& m, const Affine4& t, const Grid& target) {
  return BinaryMask(target, resample_labels(m.bits(), m.grid(), t, target, 0));
}

}  // namespace atrophy
