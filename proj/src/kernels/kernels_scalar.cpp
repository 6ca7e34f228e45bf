// Scalar reference kernels. SIMD variants must agree with these up to
// floating-point reassociation.

#include <cmath>

#include "canids/kernel_table.hpp"

namespace canids::kernels {
namespace {

void gemm_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* arow = a + r * k;
    const double* brow = b + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double arp = arow[p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += arp * brow[j];
    }
  }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nt_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double s = dot_scalar(a + i * n, b + j * n, n);
      c[i * k + j] = accumulate ? c[i * k + j] + s : s;
    }
  }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_scalar(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamStep& s) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / s.bias1;
    const double vhat = v[i] / s.bias2;
    param[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

namespace detail {

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::scalar, gemm_scalar, gemm_tn_scalar, gemm_nt_scalar,
                                 axpy_scalar,     dot_scalar,  adam_scalar};
  return table;
}

}  // namespace detail
}  // namespace canids::kernels
