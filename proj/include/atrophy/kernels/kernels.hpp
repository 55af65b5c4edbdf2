#pragma once
// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2 version chosen at runtime. The sampling and convolution
// kernels perform the same IEEE operations in the same order on both paths
// and are bit-identical; the moment reduction differs only in summation order.

#include <array>
#include <cstddef>
#include <cstdint>

namespace atrophy::kernels {

struct Moments {
  double sw = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
};

/// Dense x-fastest scalar grid.
struct SampleSource {
  const double* data = nullptr;
  std::int64_t nx = 0, ny = 0, nz = 0;
};

/// Row-major 3x4 affine mapping input coordinates to source voxel indices.
using Affine34 = std::array<double, 12>;

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  const char* name;

  /// out[i] = trilinear(src, M * (x[i], y[i], z[i], 1)), or `oob` when the
  /// mapped point falls outside [0, n-1] on any axis.
  void (*sample)(const SampleSource& src, const Affine34& m, const double* x,
                 const double* y, const double* z, std::size_t n, double oob,
                 double* out);

  /// Weighted first and second moments of the pair (a, b).
  Moments (*moments)(const double* a, const double* b, const double* w,
                     std::size_t n);

  /// One separable convolution pass along `axis` with edge replication.
  /// `taps` holds 2*radius+1 coefficients.
  void (*convolve)(const double* src, double* dst,
                   const std::array<std::int64_t, 3>& dims, int axis,
                   const double* taps, int radius);
};

const KernelTable& scalar_table();

/// nullptr when the binary was built without AVX2 kernels.
const KernelTable* avx2_table();

/// True when AVX2 kernels were compiled in and the running CPU supports them.
bool avx2_supported();

/// The table used by the library. Defaults to AVX2 when supported unless the
/// environment variable ATROPHY_SIMD is set to "scalar".
const KernelTable& active();

/// Force a backend (tests, benchmarking). Throws atrophy::Error if the
/// requested backend is unavailable.
void select(Backend backend);

}  // namespace atrophy::kernels
