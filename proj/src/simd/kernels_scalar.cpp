#include "kernels_impl.hpp"

#include <cmath>

namespace vgflow::simd::detail {

void gemm_nn_scalar(const double* a, const double* b, double* c, std::size_t rows,
                    std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * inner;
    double* crow = c + i * cols;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b + k * cols;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t rows,
                    std::size_t m, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * m;
    const double* brow = b + i * cols;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = arow[k];
      double* crow = c + k * cols;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void weighted_line_sum_scalar(const double* const* lines, const double* weights,
                              std::size_t taps, double* out, std::size_t n) {
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t t = 0; t < taps; ++t) acc += weights[t] * lines[t][x];
    out[x] = acc;
  }
}

void adam_update_scalar(double* params, const double* grads, double* m, double* v,
                        std::size_t n, const AdamStep& s) {
  const double one_minus_b1 = 1.0 - s.beta1;
  const double one_minus_b2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = s.beta1 * m[i] + one_minus_b1 * g;
    v[i] = s.beta2 * v[i] + one_minus_b2 * (g * g);
    const double mhat = m[i] / s.bias_correction1;
    const double vhat = v[i] / s.bias_correction2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace vgflow::simd::detail
