// Compiled with -mavx2. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "atrophy/kernels/kernels.hpp"

namespace atrophy::kernels {
namespace {

inline __m256d lerp(__m256d a, __m256d b, __m256d f) {
  return _mm256_add_pd(a, _mm256_mul_pd(f, _mm256_sub_pd(b, a)));
}

inline __m256d gather(const double* base, __m128i idx, __m256d valid) {
  return _mm256_mask_i32gather_pd(_mm256_setzero_pd(), base, idx, valid, 8);
}

void sample_avx2(const SampleSource& src, const Affine34& m, const double* x,
                 const double* y, const double* z, std::size_t n, double oob,
                 double* out) {
  const double xmax = static_cast<double>(src.nx - 1);
  const double ymax = static_cast<double>(src.ny - 1);
  const double zmax = static_cast<double>(src.nz - 1);
  const __m256d vxmax = _mm256_set1_pd(xmax), vymax = _mm256_set1_pd(ymax),
                vzmax = _mm256_set1_pd(zmax);
  const __m256d vxlim = _mm256_set1_pd(xmax - 1.0), vylim = _mm256_set1_pd(ymax - 1.0),
                vzlim = _mm256_set1_pd(zmax - 1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d voob = _mm256_set1_pd(oob);
  const __m256d vsy = _mm256_set1_pd(static_cast<double>(src.nx));
  const __m256d vsz = _mm256_set1_pd(static_cast<double>(src.nx * src.ny));
  const int sy = static_cast<int>(src.nx);
  const int sz = static_cast<int>(src.nx * src.ny);
  const __m128i o100 = _mm_set1_epi32(1), o010 = _mm_set1_epi32(sy),
                o110 = _mm_set1_epi32(sy + 1), o001 = _mm_set1_epi32(sz),
                o101 = _mm_set1_epi32(sz + 1), o011 = _mm_set1_epi32(sz + sy),
                o111 = _mm_set1_epi32(sz + sy + 1);
  const __m256d m0 = _mm256_set1_pd(m[0]), m1 = _mm256_set1_pd(m[1]),
                m2 = _mm256_set1_pd(m[2]), m3 = _mm256_set1_pd(m[3]),
                m4 = _mm256_set1_pd(m[4]), m5 = _mm256_set1_pd(m[5]),
                m6 = _mm256_set1_pd(m[6]), m7 = _mm256_set1_pd(m[7]),
                m8 = _mm256_set1_pd(m[8]), m9 = _mm256_set1_pd(m[9]),
                m10 = _mm256_set1_pd(m[10]), m11 = _mm256_set1_pd(m[11]);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vz = _mm256_loadu_pd(z + i);
    // Same association order as the scalar kernel: ((m0 x + m1 y) + m2 z) + m3.
    const __m256d px = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(m0, vx), _mm256_mul_pd(m1, vy)),
                      _mm256_mul_pd(m2, vz)), m3);
    const __m256d py = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(m4, vx), _mm256_mul_pd(m5, vy)),
                      _mm256_mul_pd(m6, vz)), m7);
    const __m256d pz = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(m8, vx), _mm256_mul_pd(m9, vy)),
                      _mm256_mul_pd(m10, vz)), m11);
    __m256d valid = _mm256_and_pd(_mm256_cmp_pd(px, zero, _CMP_GE_OQ),
                                  _mm256_cmp_pd(px, vxmax, _CMP_LE_OQ));
    valid = _mm256_and_pd(valid, _mm256_cmp_pd(py, zero, _CMP_GE_OQ));
    valid = _mm256_and_pd(valid, _mm256_cmp_pd(py, vymax, _CMP_LE_OQ));
    valid = _mm256_and_pd(valid, _mm256_cmp_pd(pz, zero, _CMP_GE_OQ));
    valid = _mm256_and_pd(valid, _mm256_cmp_pd(pz, vzmax, _CMP_LE_OQ));
    if (_mm256_movemask_pd(valid) == 0) {
      _mm256_storeu_pd(out + i, voob);
      continue;
    }
    // Invalid lanes are moved to the origin so the index math stays in range;
    // their gathers are masked off anyway.
    const __m256d cx = _mm256_blendv_pd(zero, px, valid);
    const __m256d cy = _mm256_blendv_pd(zero, py, valid);
    const __m256d cz = _mm256_blendv_pd(zero, pz, valid);
    const __m256d fx0 = _mm256_min_pd(_mm256_floor_pd(cx), vxlim);
    const __m256d fy0 = _mm256_min_pd(_mm256_floor_pd(cy), vylim);
    const __m256d fz0 = _mm256_min_pd(_mm256_floor_pd(cz), vzlim);
    const __m256d fx = _mm256_sub_pd(cx, fx0);
    const __m256d fy = _mm256_sub_pd(cy, fy0);
    const __m256d fz = _mm256_sub_pd(cz, fz0);
    const __m256d lin = _mm256_add_pd(
        _mm256_add_pd(fx0, _mm256_mul_pd(fy0, vsy)), _mm256_mul_pd(fz0, vsz));
    const __m128i idx = _mm256_cvttpd_epi32(lin);
    const double* d = src.data;
    const __m256d v000 = gather(d, idx, valid);
    const __m256d v100 = gather(d, _mm_add_epi32(idx, o100), valid);
    const __m256d v010 = gather(d, _mm_add_epi32(idx, o010), valid);
    const __m256d v110 = gather(d, _mm_add_epi32(idx, o110), valid);
    const __m256d v001 = gather(d, _mm_add_epi32(idx, o001), valid);
    const __m256d v101 = gather(d, _mm_add_epi32(idx, o101), valid);
    const __m256d v011 = gather(d, _mm_add_epi32(idx, o011), valid);
    const __m256d v111 = gather(d, _mm_add_epi32(idx, o111), valid);
    const __m256d c00 = lerp(v000, v100, fx);
    const __m256d c10 = lerp(v010, v110, fx);
    const __m256d c01 = lerp(v001, v101, fx);
    const __m256d c11 = lerp(v011, v111, fx);
    const __m256d c0 = lerp(c00, c10, fy);
    const __m256d c1 = lerp(c01, c11, fy);
    const __m256d v = lerp(c0, c1, fz);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(voob, v, valid));
  }
  if (i < n) scalar_table().sample(src, m, x + i, y + i, z + i, n - i, oob, out + i);
}

Moments moments_avx2(const double* a, const double* b, const double* w,
                     std::size_t n) {
  __m256d sw = _mm256_setzero_pd(), sa = sw, sb = sw, saa = sw, sbb = sw, sab = sw;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    const __m256d vw = _mm256_loadu_pd(w + i);
    const __m256d wa = _mm256_mul_pd(vw, va);
    const __m256d wb = _mm256_mul_pd(vw, vb);
    sw = _mm256_add_pd(sw, vw);
    sa = _mm256_add_pd(sa, wa);
    sb = _mm256_add_pd(sb, wb);
    saa = _mm256_add_pd(saa, _mm256_mul_pd(wa, va));
    sbb = _mm256_add_pd(sbb, _mm256_mul_pd(wb, vb));
    sab = _mm256_add_pd(sab, _mm256_mul_pd(wa, vb));
  }
  auto hsum = [](__m256d v) {
    alignas(32) double t[4];
    _mm256_store_pd(t, v);
    return (t[0] + t[1]) + (t[2] + t[3]);
  };
  Moments r{hsum(sw), hsum(sa), hsum(sb), hsum(saa), hsum(sbb), hsum(sab)};
  if (i < n) {
    const Moments tail = scalar_table().moments(a + i, b + i, w + i, n - i);
    r.sw += tail.sw;
    r.sa += tail.sa;
    r.sb += tail.sb;
    r.saa += tail.saa;
    r.sbb += tail.sbb;
    r.sab += tail.sab;
  }
  return r;
}

void convolve_avx2(const double* src, double* dst,
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
      std::int64_t i = 0;
      for (; i + 4 <= nx; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (int k = 0; k < width; ++k) {
          acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(taps[k]),
                                                 _mm256_loadu_pd(row.data() + i + k)));
        }
        _mm256_storeu_pd(d + i, acc);
      }
      for (; i < nx; ++i) {
        double acc = 0.0;
        for (int k = 0; k < width; ++k) acc += taps[k] * row[i + k];
        d[i] = acc;
      }
    }
    return;
  }
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
        const __m256d t = _mm256_set1_pd(taps[k]);
        std::int64_t i = 0;
        for (; i + 4 <= nx; i += 4) {
          _mm256_storeu_pd(d + i, _mm256_add_pd(_mm256_loadu_pd(d + i),
                                                _mm256_mul_pd(t, _mm256_loadu_pd(s + i))));
        }
        for (; i < nx; ++i) d[i] += taps[k] * s[i];
      }
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Backend::Avx2, "avx2", &sample_avx2,
                                 &moments_avx2, &convolve_avx2};
  return &table;
}

}  // namespace atrophy::kernels
