// AVX2 + FMA kernels. This file is the only one compiled with -mavx2 -mfma,
// so it must not instantiate standard-library templates (their COMDAT copies
// could leak AVX instructions into the rest of the binary).

#include <immintrin.h>

#include "canids/kernel_table.hpp"

namespace canids::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// crow[0..n) += alpha * brow[0..n)
inline void row_axpy(double alpha, const double* brow, double* crow, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d c = _mm256_loadu_pd(crow + j);
    _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), c));
  }
  for (; j < n; ++j) crow[j] += alpha * brow[j];
}

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) row_axpy(a[i * k + p], b + p * n, crow, n);
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* arow = a + r * k;
    const double* brow = b + r * n;
    for (std::size_t p = 0; p < k; ++p) row_axpy(arow[p], brow, c + p * n, n);
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k,
                  bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double s = dot_avx2(a + i * n, b + j * n, n);
      c[i * k + j] = accumulate ? c[i * k + j] + s : s;
    }
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) { row_axpy(alpha, x, y, n); }

void adam_avx2(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamStep& s) {
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d inv_bias1 = _mm256_set1_pd(1.0 / s.bias1);
  const __m256d inv_bias2 = _mm256_set1_pd(1.0 / s.bias2);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const __m256d eps = _mm256_set1_pd(s.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_mul_pd(mi, inv_bias1);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, inv_bias2)), eps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    param[i] -= s.lr * (m[i] / s.bias1) / (__builtin_sqrt(v[i] / s.bias2) + s.eps);
  }
}

}  // namespace

namespace detail {

const KernelTable& avx2_kernels() {
  static const KernelTable table{Backend::avx2, gemm_avx2, gemm_tn_avx2, gemm_nt_avx2,
                                 axpy_avx2,     dot_avx2,  adam_avx2};
  return table;
}

}  // namespace detail
}  // namespace canids::kernels
