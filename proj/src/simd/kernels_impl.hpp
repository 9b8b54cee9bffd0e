#pragma once

#include "vgflow/simd.hpp"

namespace vgflow::simd::detail {

void gemm_nn_scalar(const double* a, const double* b, double* c, std::size_t rows,
                    std::size_t inner, std::size_t cols);
void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t rows,
                    std::size_t m, std::size_t cols);
void weighted_line_sum_scalar(const double* const* lines, const double* weights,
                              std::size_t taps, double* out, std::size_t n);
void adam_update_scalar(double* params, const double* grads, double* m, double* v,
                        std::size_t n, const AdamStep& s);

#ifdef VGFLOW_HAVE_AVX2
void gemm_nn_avx2(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t inner, std::size_t cols);
void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t m, std::size_t cols);
void weighted_line_sum_avx2(const double* const* lines, const double* weights,
                            std::size_t taps, double* out, std::size_t n);
void adam_update_avx2(double* params, const double* grads, double* m, double* v,
                      std::size_t n, const AdamStep& s);
#endif

}  // namespace vgflow::simd::detail
