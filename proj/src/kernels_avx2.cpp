#include "flattab/kernels.hpp"

#include <immintrin.h>

#include <cstring>

// Compiled with -mavx2 -mfma. Entry points are only reached after the
// dispatcher has verified CPU support.

namespace flattab::kern {
namespace {

void v_add(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void v_sub(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}

void v_mul(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void v_mul_acc(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    d = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), d);
    _mm256_storeu_pd(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += a[i] * b[i];
}

void v_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d d0 = _mm256_loadu_pd(dst + i);
    __m256d d1 = _mm256_loadu_pd(dst + i + 4);
    d0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), d0);
    d1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), d1);
    _mm256_storeu_pd(dst + i, d0);
    _mm256_storeu_pd(dst + i + 4, d1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    d = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), d);
    _mm256_storeu_pd(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

void v_scale(double* dst, double alpha, const double* a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) dst[i] = alpha * a[i];
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double v_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double v_sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i];
  return acc;
}

void v_relu(double* dst, const double* a, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  for (; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void v_leaky_relu(double* dst, double slope, const double* a, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vs = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(a + i);
    __m256d mask = _mm256_cmp_pd(x, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dst + i, _mm256_blendv_pd(_mm256_mul_pd(vs, x), x, mask));
  }
  for (; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : slope * a[i];
}

void v_relu_acc_grad(double* dst, const double* x, const double* g, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dst[i] += g[i];
}

void v_leaky_relu_acc_grad(double* dst, double slope, const double* x, const double* g,
                           std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ones = _mm256_set1_pd(1.0);
  const __m256d vs = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d f = _mm256_blendv_pd(vs, ones, mask);
    __m256d d = _mm256_loadu_pd(dst + i);
    d = _mm256_fmadd_pd(f, _mm256_loadu_pd(g + i), d);
    _mm256_storeu_pd(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += x[i] > 0.0 ? g[i] : slope * g[i];
}

// dst row i accumulates a[i,t] * b_row(t); the inner loop over n is the
// vector axis.
void fma_row(double* drow, double av, const double* brow, std::size_t n) {
  const __m256d va = _mm256_set1_pd(av);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d d0 = _mm256_loadu_pd(drow + j);
    __m256d d1 = _mm256_loadu_pd(drow + j + 4);
    d0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), d0);
    d1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j + 4), d1);
    _mm256_storeu_pd(drow + j, d0);
    _mm256_storeu_pd(drow + j + 4, d1);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d d = _mm256_loadu_pd(drow + j);
    d = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), d);
    _mm256_storeu_pd(drow + j, d);
  }
  for (; j < n; ++j) drow[j] += av * brow[j];
}

void v_matmul(double* dst, const double* a, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  std::memset(dst, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* drow = dst + i * n;
    const double* arow = a + i * k;
    for (std::size_t t = 0; t < k; ++t) fma_row(drow, arow[t], b + t * n, n);
  }
}

void v_matmul_atb_acc(double* dst, const double* a, const double* g, std::size_t m, std::size_t k,
                      std::size_t n) {
  for (std::size_t t = 0; t < m; ++t) {
    const double* grow = g + t * n;
    const double* arow = a + t * k;
    for (std::size_t i = 0; i < k; ++i) fma_row(dst + i * n, arow[i], grow, n);
  }
}

void v_matmul_abt_acc(double* dst, const double* g, const double* b, std::size_t m, std::size_t k,
                      std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* drow = dst + i * k;
    for (std::size_t j = 0; j < k; ++j) drow[j] += v_dot(grow, b + j * n, n);
  }
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table = {
      .name = "avx2",
      .add = v_add,
      .sub = v_sub,
      .mul = v_mul,
      .mul_acc = v_mul_acc,
      .axpy = v_axpy,
      .scale = v_scale,
      .dot = v_dot,
      .sum = v_sum,
      .relu = v_relu,
      .leaky_relu = v_leaky_relu,
      .relu_acc_grad = v_relu_acc_grad,
      .leaky_relu_acc_grad = v_leaky_relu_acc_grad,
      .matmul = v_matmul,
      .matmul_atb_acc = v_matmul_atb_acc,
      .matmul_abt_acc = v_matmul_abt_acc,
  };
  return table;
}

}  // namespace flattab::kern
