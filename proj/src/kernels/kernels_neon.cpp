// NEON kernels for AArch64 (two doubles per register). NEON is part of the
// AArch64 baseline, so no per-file ISA flags are needed.

#include <arm_neon.h>

#include "canids/kernel_table.hpp"

namespace canids::kernels {
namespace {

inline void row_axpy(double alpha, const double* brow, double* crow, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), va, vld1q_f64(brow + j)));
  for (; j < n; ++j) crow[j] += alpha * brow[j];
}

void gemm_neon(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) row_axpy(a[i * k + p], b + p * n, crow, n);
  }
}

void gemm_tn_neon(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t p = 0; p < k; ++p) row_axpy(a[r * k + p], b + r * n, c + p * n, n);
  }
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nt_neon(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double s = dot_neon(a + i * n, b + j * n, n);
      c[i * k + j] = accumulate ? c[i * k + j] + s : s;
    }
  }
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) { row_axpy(alpha, x, y, n); }

void adam_neon(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamStep& s) {
  const float64x2_t b1 = vdupq_n_f64(s.beta1);
  const float64x2_t b2 = vdupq_n_f64(s.beta2);
  const float64x2_t omb1 = vdupq_n_f64(1.0 - s.beta1);
  const float64x2_t omb2 = vdupq_n_f64(1.0 - s.beta2);
  const float64x2_t inv_bias1 = vdupq_n_f64(1.0 / s.bias1);
  const float64x2_t inv_bias2 = vdupq_n_f64(1.0 / s.bias2);
  const float64x2_t lr = vdupq_n_f64(s.lr);
  const float64x2_t eps = vdupq_n_f64(s.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vfmaq_f64(vmulq_f64(omb1, g), b1, vld1q_f64(m + i));
    const float64x2_t vi = vfmaq_f64(vmulq_f64(omb2, vmulq_f64(g, g)), b2, vld1q_f64(v + i));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_f64(vi, inv_bias2)), eps);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, vmulq_f64(mi, inv_bias1)), denom);
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    param[i] -= s.lr * (m[i] / s.bias1) / (__builtin_sqrt(v[i] / s.bias2) + s.eps);
  }
}

}  // namespace

namespace detail {

const KernelTable& neon_kernels() {
  static const KernelTable table{Backend::neon, gemm_neon, gemm_tn_neon, gemm_nt_neon,
                                 axpy_neon,     dot_neon,  adam_neon};
  return table;
}

}  // namespace detail
}  // namespace canids::kernels
