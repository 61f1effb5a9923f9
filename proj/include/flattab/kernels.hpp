#pragma once

#include <cstddef>

namespace flattab::kern {

// Dense kernels over contiguous 64-bit float buffers. Every entry has a
// scalar reference implementation; on x86-64 an AVX2+FMA variant is compiled
// alongside and picked at runtime. Matrices are row-major.
//
// The scalar table is the reference semantics: elementwise entries of the
// SIMD table must match it bit-for-bit, accumulating/reduction entries only
// up to rounding (FMA and tree reduction reorder the arithmetic).
struct KernelTable {
  const char* name;

  void (*add)(double* dst, const double* a, const double* b, std::size_t n);
  void (*sub)(double* dst, const double* a, const double* b, std::size_t n);
  void (*mul)(double* dst, const double* a, const double* b, std::size_t n);
  // dst += a * b (elementwise)
  void (*mul_acc)(double* dst, const double* a, const double* b, std::size_t n);
  // dst += alpha * x
  void (*axpy)(double* dst, double alpha, const double* x, std::size_t n);
  // dst = alpha * a
  void (*scale)(double* dst, double alpha, const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);

  void (*relu)(double* dst, const double* a, std::size_t n);
  void (*leaky_relu)(double* dst, double slope, const double* a, std::size_t n);
  // dst += g * relu'(x)
  void (*relu_acc_grad)(double* dst, const double* x, const double* g, std::size_t n);
  void (*leaky_relu_acc_grad)(double* dst, double slope, const double* x, const double* g,
                              std::size_t n);

  // dst[m,n] = a[m,k] * b[k,n]
  void (*matmul)(double* dst, const double* a, const double* b, std::size_t m, std::size_t k,
                 std::size_t n);
  // dst[k,n] += a[m,k]^T * g[m,n]
  void (*matmul_atb_acc)(double* dst, const double* a, const double* g, std::size_t m,
                         std::size_t k, std::size_t n);
  // dst[m,k] += g[m,n] * b[k,n]^T
  void (*matmul_abt_acc)(double* dst, const double* g, const double* b, std::size_t m,
                         std::size_t k, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// Selected once per process: AVX2 when available, else scalar. The
// FLATTAB_KERNELS environment variable (values "scalar" / "avx2") forces a
// specific table; forcing avx2 on an unsupported CPU aborts with a message.
const KernelTable& active();

}  // namespace flattab::kern
