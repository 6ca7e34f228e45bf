#include <atomic>
#include <string>

#include "canids/error.hpp"
#include "canids/kernels.hpp"

namespace canids::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CANIDS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{nullptr};
  return table;
}

}  // namespace

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return detail::scalar_kernels(); }

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar: return &detail::scalar_kernels();
    case Backend::avx2:
#if defined(CANIDS_HAVE_AVX2)
      if (cpu_has_avx2()) return &detail::avx2_kernels();
#endif
      return nullptr;
    case Backend::neon:
#if defined(CANIDS_HAVE_NEON)
      return &detail::neon_kernels();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend detect_best() {
  if (table_for(Backend::avx2)) return Backend::avx2;
  if (table_for(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& active() {
  const KernelTable* t = current().load(std::memory_order_acquire);
  if (t == nullptr) {
    t = table_for(detect_best());
    current().store(t, std::memory_order_release);
  }
  return *t;
}

void select(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) throw ConfigError("kernel backend '" + std::string(to_string(b)) + "' is not available");
  current().store(t, std::memory_order_release);
}

}  // namespace canids::kernels
