#pragma once
// Dense double-precision inner loops used by the matrix and optimizer code.
//
// Every kernel has a scalar reference implementation; SIMD variants (AVX2+FMA
// on x86-64, NEON on AArch64) are selected once at runtime. All matrices are
// row-major and contiguous.

#include <cstddef>
#include <span>
#include <string_view>

#include "canids/kernel_table.hpp"

namespace canids::kernels {

std::string_view to_string(Backend b);

const KernelTable& scalar_table();
/// Table for a backend, or nullptr if not compiled in or not supported by the CPU.
const KernelTable* table_for(Backend b);
/// Best backend the running CPU supports.
Backend detect_best();

/// Currently selected table (detect_best() on first use).
const KernelTable& active();
/// Throws ConfigError if the backend is unavailable.
void select(Backend b);

// Convenience wrappers over active().
inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate = false) {
  active().gemm(a, b, c, m, k, n, accumulate);
}
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  active().gemm_tn(a, b, c, m, k, n);
}
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k,
                    bool accumulate = false) {
  active().gemm_nt(a, b, c, m, n, k, accumulate);
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

}  // namespace canids::kernels
