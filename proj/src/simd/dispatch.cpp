#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace vgflow::simd {

namespace {

const KernelTable kScalar{
    "scalar",
    &detail::gemm_nn_scalar,
    &detail::gemm_tn_scalar,
    &detail::weighted_line_sum_scalar,
    &detail::adam_update_scalar,
};

#ifdef VGFLOW_HAVE_AVX2
const KernelTable kAvx2{
    "avx2",
    &detail::gemm_nn_avx2,
    &detail::gemm_tn_avx2,
    &detail::weighted_line_sum_avx2,
    &detail::adam_update_avx2,
};
#endif

const KernelTable& select() {
  const char* forced = std::getenv("VGFLOW_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return kScalar;
  if (const KernelTable* t = avx2_kernels(); t != nullptr && cpu_has_avx2()) return *t;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#ifdef VGFLOW_HAVE_AVX2
  return &kAvx2;
#else
  return nullptr;
#endif
}

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace vgflow::simd
