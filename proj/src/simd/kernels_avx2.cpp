// Compiled with -mavx2 only. Multiplies and adds stay separate instructions
// so every lane rounds exactly like the scalar reference.
#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace vgflow::simd::detail {

void gemm_nn_avx2(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * inner;
    double* crow = c + i * cols;
    std::size_t j = 0;
    for (; j + 16 <= cols; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t k = 0; k < inner; ++k) {
        const __m256d aik = _mm256_set1_pd(arow[k]);
        const double* brow = b + k * cols + j;
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(aik, _mm256_loadu_pd(brow)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(aik, _mm256_loadu_pd(brow + 4)));
        c2 = _mm256_add_pd(c2, _mm256_mul_pd(aik, _mm256_loadu_pd(brow + 8)));
        c3 = _mm256_add_pd(c3, _mm256_mul_pd(aik, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= cols; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t k = 0; k < inner; ++k) {
        const __m256d aik = _mm256_set1_pd(arow[k]);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(aik, _mm256_loadu_pd(b + k * cols + j)));
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < cols; ++j) {
      double acc = crow[j];
      for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * b[k * cols + j];
      crow[j] = acc;
    }
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t rows,
                  std::size_t m, std::size_t cols) {
  // Accumulators stay in registers across i; per element the sum still runs
  // over i in ascending order.
  for (std::size_t k = 0; k < m; ++k) {
    double* crow = c + k * cols;
    std::size_t j = 0;
    for (; j + 16 <= cols; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t i = 0; i < rows; ++i) {
        const __m256d va = _mm256_set1_pd(a[i * m + k]);
        const double* brow = b + i * cols + j;
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(brow)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 4)));
        c2 = _mm256_add_pd(c2, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 8)));
        c3 = _mm256_add_pd(c3, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= cols; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t i = 0; i < rows; ++i) {
        const __m256d va = _mm256_set1_pd(a[i * m + k]);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(b + i * cols + j)));
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < cols; ++j) {
      double acc = crow[j];
      for (std::size_t i = 0; i < rows; ++i) acc += a[i * m + k] * b[i * cols + j];
      crow[j] = acc;
    }
  }
}

void weighted_line_sum_avx2(const double* const* lines, const double* weights,
                            std::size_t taps, double* out, std::size_t n) {
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t t = 0; t < taps; ++t) {
      const __m256d w = _mm256_set1_pd(weights[t]);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_loadu_pd(lines[t] + x)));
    }
    _mm256_storeu_pd(out + x, acc);
  }
  for (; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t t = 0; t < taps; ++t) acc += weights[t] * lines[t][x];
    out[x] = acc;
  }
}

void adam_update_avx2(double* params, const double* grads, double* m, double* v,
                      std::size_t n, const AdamStep& s) {
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d bc1 = _mm256_set1_pd(s.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(s.bias_correction2);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const __m256d eps = _mm256_set1_pd(s.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grads + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_add_pd(_mm256_mul_pd(b1, mi), _mm256_mul_pd(omb1, g));
    vi = _mm256_add_pd(_mm256_mul_pd(b2, vi), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bc1);
    const __m256d vhat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
  }
  if (i < n) adam_update_scalar(params + i, grads + i, m + i, v + i, n - i, s);
}

}  // namespace vgflow::simd::detail
