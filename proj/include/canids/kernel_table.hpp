#pragma once
// Kernel function-pointer table. Kept free of standard-library templates so
// ISA-specific translation units can include it safely.

#include <cstddef>

namespace canids::kernels {

enum class Backend { scalar, avx2, neon };

/// c[m x n] (+)= a[m x k] * b[k x n]
using GemmFn = void (*)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                        bool accumulate);
/// c[k x n] += a[m x k]^T * b[m x n]
using GemmTnFn = void (*)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                          std::size_t n);
/// c[m x k] (+)= a[m x n] * b[k x n]^T
using GemmNtFn = void (*)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k,
                          bool accumulate);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
using DotFn = double (*)(const double* x, const double* y, std::size_t n);

struct AdamStep {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};
using AdamFn = void (*)(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamStep& s);

struct KernelTable {
  Backend backend;
  GemmFn gemm;
  GemmTnFn gemm_tn;
  GemmNtFn gemm_nt;
  AxpyFn axpy;
  DotFn dot;
  AdamFn adam;
};

namespace detail {
// Per-ISA entry points; defined in kernels_<isa>.cpp.
const KernelTable& scalar_kernels();
const KernelTable& avx2_kernels();
const KernelTable& neon_kernels();
}  // namespace detail

}  // namespace canids::kernels
