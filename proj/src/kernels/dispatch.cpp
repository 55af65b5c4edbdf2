#include <atomic>
#include <cstdlib>
#include <string_view>

#include "atrophy/error.hpp"
#include "atrophy/kernels/kernels.hpp"

namespace atrophy::kernels {

#ifndef ATROPHY_HAVE_AVX2_KERNELS
const KernelTable* avx2_table() { return nullptr; }
#endif

bool avx2_supported() {
#if defined(ATROPHY_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("ATROPHY_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (avx2_supported()) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend backend) {
  if (backend == Backend::Scalar) {
    current().store(&scalar_table(), std::memory_order_release);
    return;
  }
  if (!avx2_supported()) throw Error("AVX2 kernels are not available on this machine");
  current().store(avx2_table(), std::memory_order_release);
}

}  // namespace atrophy::kernels
