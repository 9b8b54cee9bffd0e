#pragma once
// Data-parallel inner loops used by the smoothing filter, the GNN dense
// layers and the optimizer. Every kernel has a scalar reference and, where
// the target supports it, an AVX2 variant. Variants vectorize across
// independent output lanes only, so each output element sees the same
// sequence of IEEE operations and the results are bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace vgflow::simd {

struct AdamStep {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;

  // c[i, :] += sum_k a[i, k] * b[k, :], k ascending.
  // a: rows x inner, b: inner x cols, c: rows x cols, all row-major.
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t inner, std::size_t cols);

  // c[k, :] += sum_i a[i, k] * b[i, :], i ascending.
  // a: rows x m, b: rows x cols, c: m x cols.
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t m, std::size_t cols);

  // out[x] = sum_t weights[t] * lines[t][x], t ascending.
  void (*weighted_line_sum)(const double* const* lines, const double* weights,
                            std::size_t taps, double* out, std::size_t n);

  // In-place Adam update of params given gradients and moment buffers.
  void (*adam_update)(double* params, const double* grads, double* m, double* v,
                      std::size_t n, const AdamStep& step);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

// True when the running CPU can execute the AVX2 table.
bool cpu_has_avx2();

// Kernel table selected at first use: AVX2 when compiled and supported,
// scalar otherwise. VGFLOW_SIMD=scalar in the environment forces scalar.
const KernelTable& active();

}  // namespace vgflow::simd
