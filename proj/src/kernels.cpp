#include "flattab/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace flattab::kern {

#if FLATTAB_HAVE_AVX2
const KernelTable& avx2_table_impl();

static bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable* avx2_table() { return cpu_has_avx2_fma() ? &avx2_table_impl() : nullptr; }
#else
const KernelTable* avx2_table() { return nullptr; }
#endif

static const KernelTable& select() {
  const char* force = std::getenv("FLATTAB_KERNELS");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return scalar_table();
    if (std::strcmp(force, "avx2") == 0) {
      const KernelTable* t = avx2_table();
      if (t == nullptr) {
        std::fprintf(stderr, "flattab: FLATTAB_KERNELS=avx2 but AVX2/FMA is unavailable\n");
        std::abort();
      }
      return *t;
    }
    std::fprintf(stderr, "flattab: unknown FLATTAB_KERNELS value '%s' (use scalar|avx2)\n", force);
    std::abort();
  }
  const KernelTable* t = avx2_table();
  return t != nullptr ? *t : scalar_table();
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace flattab::kern
