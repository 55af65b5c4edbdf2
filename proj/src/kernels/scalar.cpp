#include "atrophy/kernels/kernels.hpp"

#include <algorithm>
#include <vector>

namespace atrophy::kernels {
namespace {

void sample_scalar(const SampleSource& src, const Affine34& m, const double* x,
                   const double* y, const double* z, std::size_t n, double oob,
                   double* out) {
  const double xmax = static_cast<double>(src.nx - 1);
  const double ymax = static_cast<double>(src.ny - 1);
  const double zmax = static_cast<double>(src.nz - 1);
  const std::int64_t sy = src.nx;
  const std::int64_t sz = src.nx * src.ny;
  for (std::size_t i = 0; i < n; ++i) {
    const double px = m[0] * x[i] + m[1] * y[i] + m[2] * z[i] + m[3];
    const double py = m[4] * x[i] + m[5] * y[i] + m[6] * z[i] + m[7];
    const double pz = m[8] * x[i] + m[9] * y[i] + m[10] * z[i] + m[11];
    if (!(px >= 0.0 && px <= xmax && py >= 0.0 && py <= ymax && pz >= 0.0 &&
          pz <= zmax)) {
      out[i] = oob;
      continue;
    }
    const double fx0 = std::min(static_cast<double>(static_cast<std::int64_t>(px)), xmax - 1.0);
    const double fy0 = std::min(static_cast<double>(static_cast<std::int64_t>(py)), ymax - 1.0);
    const double fz0 = std::min(static_cast<double>(static_cast<std::int64_t>(pz)), zmax - 1.0);
    const double fx = px - fx0;
    const double fy = py - fy0;
    const double fz = pz - fz0;
    const std::int64_t base = static_cast<std::int64_t>(fx0) +
                              static_cast<std::int64_t>(fy0) * sy +
                              static_cast<std::int64_t>(fz0) * sz;
    const double* d = src.data + base;
    const double v000 = d[0], v100 = d[1];
    const double v010 = d[sy], v110 = d[sy + 1];
    const double v001 = d[sz], v101 = d[sz + 1];
    const double v011 = d[sz + sy], v111 = d[sz + sy + 1];
    const double c00 = v000 + fx * (v100 - v000);
    const double c10 = v010 + fx * (v110 - v010);
    const double c01 = v001 + fx * (v101 - v001);
    const double c11 = v011 + fx * (v111 - v011);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    out[i] = c0 + fz * (c1 - c0);
  }
}

Moments moments_scalar(const double* a, const double* b, const double* w,
                       std::size_t n) {
  Moments r;
  for (std::size_t i = 0; i < n; ++i) {
    const double wa = w[i] * a[i];
    const double wb = w[i] * b[i];
    r.sw += w[i];
    r.sa += wa;
    r.sb += wb;
    r.saa += wa * a[i];
    r.sbb += wb * b[i];
    r.sab += wa * b[i];
  }
  return r;
}

void convolve_scalar(const double* src, double* dst,
                     const std::array<std::int64_t, 3>& dims, int axis,
                     const double* taps, int radius) {
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
  const int width = 2 * radius + 1;
  if (axis == 0) {
    std::vector<double> row(static_cast<std::size_t>(nx + 2 * radius));
    for (std::int64_t line = 0; line < ny * nz; ++line) {
      const double* s = src + line * nx;
      for (std::int64_t i = 0; i < nx + 2 * radius; ++i) {
        row[i] = s[std::clamp<std::int64_t>(i - radius, 0, nx - 1)];
      }
      double* d = dst + line * nx;
      for (std::int64_t i = 0; i < nx; ++i) {
        double acc = 0.0;
        for (int k = 0; k < width; ++k) acc += taps[k] * row[i + k];
        d[i] = acc;
      }
    }
    return;
  }
  // Axes 1 and 2: combine whole x-rows so the inner loop is contiguous.
  const std::int64_t n_along = axis == 1 ? ny : nz;
  const std::int64_t stride = axis == 1 ? nx : nx * ny;
  const std::int64_t n_outer = axis == 1 ? nz : ny;
  const std::int64_t outer_stride = axis == 1 ? nx * ny : nx;
  for (std::int64_t o = 0; o < n_outer; ++o) {
    for (std::int64_t j = 0; j < n_along; ++j) {
      double* d = dst + o * outer_stride + j * stride;
      for (std::int64_t i = 0; i < nx; ++i) d[i] = 0.0;
      for (int k = 0; k < width; ++k) {
        const std::int64_t jj = std::clamp<std::int64_t>(j + k - radius, 0, n_along - 1);
        const double* s = src + o * outer_stride + jj * stride;
        const double t = taps[k];
        for (std::int64_t i = 0; i < nx; ++i) d[i] += t * s[i];
      }
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::Scalar, "scalar", &sample_scalar,
                                 &moments_scalar, &convolve_scalar};
  return table;
}

}  // namespace atrophy::kernels
