#include "flattab/kernels.hpp"

#include <cstring>

namespace flattab::kern {
namespace {

void s_add(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void s_sub(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void s_mul(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void s_mul_acc(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}

void s_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

void s_scale(double* dst, double alpha, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = alpha * a[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double s_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void s_relu(double* dst, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void s_leaky_relu(double* dst, double slope, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : slope * a[i];
}

void s_relu_acc_grad(double* dst, const double* x, const double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dst[i] += g[i];
}

void s_leaky_relu_acc_grad(double* dst, double slope, const double* x, const double* g,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += x[i] > 0.0 ? g[i] : slope * g[i];
}

void s_matmul(double* dst, const double* a, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  std::memset(dst, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* drow = dst + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      const double* brow = b + t * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
    }
  }
}

void s_matmul_atb_acc(double* dst, const double* a, const double* g, std::size_t m, std::size_t k,
                      std::size_t n) {
  for (std::size_t t = 0; t < m; ++t) {
    const double* grow = g + t * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a[t * k + i];
      double* drow = dst + i * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
    }
  }
}

void s_matmul_abt_acc(double* dst, const double* g, const double* b, std::size_t m, std::size_t k,
                      std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += grow[t] * brow[t];
      dst[i * k + j] += acc;
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      .name = "scalar",
      .add = s_add,
      .sub = s_sub,
      .mul = s_mul,
      .mul_acc = s_mul_acc,
      .axpy = s_axpy,
      .scale = s_scale,
      .dot = s_dot,
      .sum = s_sum,
      .relu = s_relu,
      .leaky_relu = s_leaky_relu,
      .relu_acc_grad = s_relu_acc_grad,
      .leaky_relu_acc_grad = s_leaky_relu_acc_grad,
      .matmul = s_matmul,
      .matmul_atb_acc = s_matmul_atb_acc,
      .matmul_abt_acc = s_matmul_abt_acc,
  };
  return table;
}

}  // namespace flattab::kern
