#include "atrophy/imgvol/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/sampling.hpp"

namespace atrophy {

namespace {

// Cubic B-spline prefilter pole and the matching gain (1 - z)(1 - 1/z).
constexpr double kPole = -0.2679491924311227;  // sqrt(3) - 2
constexpr double kGain = 6.0;

void prefilter_line(std::vector<double>& c) {
  const auto n = static_cast<std::int64_t>(c.size());
  if (n == 1) return;
  for (double& v : c) v *= kGain;
  // Causal initialization for mirror boundaries; truncated once z^k is
  // negligible, exact otherwise.
  const auto horizon =
      static_cast<std::int64_t>(std::ceil(std::log(1e-16) / std::log(std::abs(kPole))));
  double sum = c[0];
  if (horizon < n) {
    double zk = kPole;
    for (std::int64_t k = 1; k < horizon; ++k) {
      sum += zk * c[static_cast<std::size_t>(k)];
      zk *= kPole;
    }
  } else {
    const double zn = std::pow(kPole, static_cast<double>(n - 1));
    const double iz = 1.0 / kPole;
    double zk = kPole, z2n = zn * zn * iz;
    sum += zn * c[static_cast<std::size_t>(n - 1)];
    for (std::int64_t k = 1; k < n - 1; ++k) {
      sum += (zk + z2n) * c[static_cast<std::size_t>(k)];
      zk *= kPole;
      z2n *= iz;
    }
    sum /= 1.0 - zn * zn;
  }
  c[0] = sum;
  for (std::int64_t k = 1; k < n; ++k) {
    c[static_cast<std::size_t>(k)] += kPole * c[static_cast<std::size_t>(k - 1)];
  }
  const auto last = static_cast<std::size_t>(n - 1);
  c[last] = (kPole / (kPole * kPole - 1.0)) * (c[last] + kPole * c[last - 1]);
  for (std::int64_t k = n - 2; k >= 0; --k) {
    const auto kk = static_cast<std::size_t>(k);
    c[kk] = kPole * (c[kk + 1] - c[kk]);
  }
}

inline std::int64_t mirror(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline void weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t, u = 1.0 - t;
  w[0] = u * u * u / 6.0;
  w[1] = (4.0 - 6.0 * t2 + 3.0 * t3) / 6.0;
  w[2] = (1.0 + 3.0 * t + 3.0 * t2 - 3.0 * t3) / 6.0;
  w[3] = t3 / 6.0;
}

}  // namespace

CubicBSpline::CubicBSpline(const Volume& v) : coeff_(v) {
  const Grid& g = v.grid();
  const std::int64_t dims[3] = {g.nx(), g.ny(), g.nz()};
  auto data = coeff_.data();
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = dims[axis];
    std::vector<double> line(static_cast<std::size_t>(n));
    const std::int64_t o1 = axis == 0 ? dims[1] : dims[0];
    const std::int64_t o2 = axis == 2 ? dims[1] : dims[2];
    for (std::int64_t q = 0; q < o2; ++q) {
      for (std::int64_t p = 0; p < o1; ++p) {
        auto index = [&](std::int64_t k) {
          if (axis == 0) return g.index(k, p, q);
          if (axis == 1) return g.index(p, k, q);
          return g.index(p, q, k);
        };
        for (std::int64_t k = 0; k < n; ++k) line[static_cast<std::size_t>(k)] = data[index(k)];
        prefilter_line(line);
        for (std::int64_t k = 0; k < n; ++k) data[index(k)] = line[static_cast<std::size_t>(k)];
      }
    }
  }
}

double CubicBSpline::at_voxel(double x, double y, double z, double oob) const {
  const Grid& g = coeff_.grid();
  const double hi[3] = {static_cast<double>(g.nx() - 1), static_cast<double>(g.ny() - 1),
                        static_cast<double>(g.nz() - 1)};
  // Points within rounding distance of the border (world/voxel round trips
  // on oblique grids) count as inside.
  constexpr double kEdge = 1e-9;
  if (!(x >= -kEdge && x <= hi[0] + kEdge && y >= -kEdge && y <= hi[1] + kEdge && z >= -kEdge &&
        z <= hi[2] + kEdge)) {
    return oob;
  }
  x = std::clamp(x, 0.0, hi[0]);
  y = std::clamp(y, 0.0, hi[1]);
  z = std::clamp(z, 0.0, hi[2]);
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  double wx[4], wy[4], wz[4];
  weights(x - fx, wx);
  weights(y - fy, wy);
  weights(z - fz, wz);
  const auto ix = static_cast<std::int64_t>(fx) - 1;
  const auto iy = static_cast<std::int64_t>(fy) - 1;
  const auto iz = static_cast<std::int64_t>(fz) - 1;
  const auto c = coeff_.data();
  double acc = 0.0;
  if (ix >= 0 && iy >= 0 && iz >= 0 && ix + 3 < g.nx() && iy + 3 < g.ny() && iz + 3 < g.nz()) {
    const std::int64_t sy = g.nx(), sz = g.nx() * g.ny();
    const double* base = c.data() + g.index(ix, iy, iz);
    for (int k = 0; k < 4; ++k) {
      double acc_y = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double* row = base + k * sz + j * sy;
        acc_y += wy[j] * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
      }
      acc += wz[k] * acc_y;
    }
    return acc;
  }
  std::int64_t xs[4], ys[4], zs[4];
  for (int k = 0; k < 4; ++k) {
    xs[k] = mirror(ix + k, g.nx());
    ys[k] = mirror(iy + k, g.ny());
    zs[k] = mirror(iz + k, g.nz());
  }
  for (int k = 0; k < 4; ++k) {
    double acc_y = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double* row = c.data() + g.index(0, ys[j], zs[k]);
      acc_y += wy[j] * (wx[0] * row[xs[0]] + wx[1] * row[xs[1]] + wx[2] * row[xs[2]] +
                        wx[3] * row[xs[3]]);
    }
    acc += wz[k] * acc_y;
  }
  return acc;
}

double CubicBSpline::sample(const Vec3& p_world, double oob) const {
  const Vec3 p = coeff_.grid().to_voxel(p_world);
  return at_voxel(p[0], p[1], p[2], oob);
}

void CubicBSpline::sample_many(std::span<const double> wx, std::span<const double> wy,
                               std::span<const double> wz, std::span<double> out,
                               double oob) const {
  const std::size_t n = out.size();
  if (wx.size() != n || wy.size() != n || wz.size() != n) {
    throw Error("CubicBSpline::sample_many: coordinate and output lengths differ");
  }
  const Mat4& m = coeff_.grid().world_to_vox().matrix();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m(0, 0) * wx[i] + m(0, 1) * wy[i] + m(0, 2) * wz[i] + m(0, 3);
    const double y = m(1, 0) * wx[i] + m(1, 1) * wy[i] + m(1, 2) * wz[i] + m(1, 3);
    const double z = m(2, 0) * wx[i] + m(2, 1) * wy[i] + m(2, 2) * wz[i] + m(2, 3);
    out[i] = at_voxel(x, y, z, oob);
  }
}

Volume resample_cubic(const Volume& v, const Affine4& t, const Grid& target, double oob) {
  const CubicBSpline spline(v);
  const kernels::Affine34 m = index_map(target, t.inverse(), v.grid());
  std::vector<double> out(target.size());
  for (std::int64_t z = 0; z < target.nz(); ++z) {
    for (std::int64_t y = 0; y < target.ny(); ++y) {
      for (std::int64_t x = 0; x < target.nx(); ++x) {
        const auto fx = static_cast<double>(x), fy = static_cast<double>(y),
                   fz = static_cast<double>(z);
        out[target.index(x, y, z)] =
            spline.at_voxel(m[0] * fx + m[1] * fy + m[2] * fz + m[3],
                            m[4] * fx + m[5] * fy + m[6] * fz + m[7],
                            m[8] * fx + m[9] * fy + m[10] * fz + m[11], oob);
      }
    }
  }
  return Volume(target, std::move(out));
}

}  // namespace atrophy
