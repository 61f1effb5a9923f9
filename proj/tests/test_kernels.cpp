#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flattab/kernels.hpp"
#include "flattab/rng.hpp"

using namespace flattab;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Sizes that exercise the full vector body, the 4-wide tail and the scalar
// remainder of every kernel.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 31, 64, 67, 129};

}  // namespace

TEST_CASE("active table is usable and named") {
  const kern::KernelTable& t = kern::active();
  CHECK(t.name != nullptr);
  double a[3] = {1, 2, 3}, b[3] = {4, 5, 6}, d[3];
  t.add(d, a, b, 3);
  CHECK(d[0] == 5.0);
  CHECK(d[2] == 9.0);
}

TEST_CASE("scalar vs avx2: elementwise kernels match bit for bit") {
  const kern::KernelTable* v = kern::avx2_table();
  if (v == nullptr) return;  // nothing to compare on this machine
  const kern::KernelTable& s = kern::scalar_table();
  Rng rng(1234);
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n), b = random_vec(rng, n);
    std::vector<double> rs(n), rv(n);

    s.add(rs.data(), a.data(), b.data(), n);
    v->add(rv.data(), a.data(), b.data(), n);
    CHECK(rs == rv);
    s.sub(rs.data(), a.data(), b.data(), n);
    v->sub(rv.data(), a.data(), b.data(), n);
    CHECK(rs == rv);
    s.mul(rs.data(), a.data(), b.data(), n);
    v->mul(rv.data(), a.data(), b.data(), n);
    CHECK(rs == rv);
    s.scale(rs.data(), 0.37, a.data(), n);
    v->scale(rv.data(), 0.37, a.data(), n);
    CHECK(rs == rv);
    s.relu(rs.data(), a.data(), n);
    v->relu(rv.data(), a.data(), n);
    CHECK(rs == rv);
    s.leaky_relu(rs.data(), 0.2, a.data(), n);
    v->leaky_relu(rv.data(), 0.2, a.data(), n);
    CHECK(rs == rv);

    // Gradient masks: start from identical accumulators.
    rs = random_vec(rng, n);
    rv = rs;
    s.relu_acc_grad(rs.data(), a.data(), b.data(), n);
    v->relu_acc_grad(rv.data(), a.data(), b.data(), n);
    CHECK(rs == rv);
  }
}

TEST_CASE("scalar vs avx2: fma and reduction kernels match within rounding") {
  const kern::KernelTable* v = kern::avx2_table();
  if (v == nullptr) return;
  const kern::KernelTable& s = kern::scalar_table();
  Rng rng(99);
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n), b = random_vec(rng, n);
    auto base = random_vec(rng, n);

    std::vector<double> rs = base, rv = base;
    s.mul_acc(rs.data(), a.data(), b.data(), n);
    v->mul_acc(rv.data(), a.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rs[i] == doctest::Approx(rv[i]).epsilon(1e-13));

    rs = base;
    rv = base;
    s.axpy(rs.data(), -0.91, a.data(), n);
    v->axpy(rv.data(), -0.91, a.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rs[i] == doctest::Approx(rv[i]).epsilon(1e-13));

    const double ds = s.dot(a.data(), b.data(), n);
    const double dv = v->dot(a.data(), b.data(), n);
    CHECK(std::fabs(ds - dv) <= 1e-12 * (1.0 + static_cast<double>(n)));

    const double ss = s.sum(a.data(), n);
    const double sv = v->sum(a.data(), n);
    CHECK(std::fabs(ss - sv) <= 1e-12 * (1.0 + static_cast<double>(n)));

    s.leaky_relu_acc_grad(rs.data(), 0.2, a.data(), b.data(), n);
    v->leaky_relu_acc_grad(rv.data(), 0.2, a.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rs[i] == doctest::Approx(rv[i]).epsilon(1e-13));
  }
}

TEST_CASE("scalar vs avx2: matrix products agree") {
  const kern::KernelTable* v = kern::avx2_table();
  if (v == nullptr) return;
  const kern::KernelTable& s = kern::scalar_table();
  Rng rng(7);
  const std::size_t dims[][3] = {{1, 1, 1},  {2, 3, 4},  {3, 5, 1},   {10, 2, 64},
                                 {7, 64, 9}, {5, 17, 33}, {16, 16, 16}};
  for (auto [m, k, n] : dims) {
    auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), g = random_vec(rng, m * n);

    std::vector<double> cs(m * n), cv(m * n);
    s.matmul(cs.data(), a.data(), b.data(), m, k, n);
    v->matmul(cv.data(), a.data(), b.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i)
      CHECK(std::fabs(cs[i] - cv[i]) <= 1e-12 * (1.0 + static_cast<double>(k)));

    auto accs = random_vec(rng, k * n);
    auto accv = accs;
    s.matmul_atb_acc(accs.data(), a.data(), g.data(), m, k, n);
    v->matmul_atb_acc(accv.data(), a.data(), g.data(), m, k, n);
    for (std::size_t i = 0; i < k * n; ++i)
      CHECK(std::fabs(accs[i] - accv[i]) <= 1e-12 * (1.0 + static_cast<double>(m)));

    auto bccs = random_vec(rng, m * k);
    auto bccv = bccs;
    s.matmul_abt_acc(bccs.data(), g.data(), b.data(), m, k, n);
    v->matmul_abt_acc(bccv.data(), g.data(), b.data(), m, k, n);
    for (std::size_t i = 0; i < m * k; ++i)
      CHECK(std::fabs(bccs[i] - bccv[i]) <= 1e-12 * (1.0 + static_cast<double>(n)));
  }
}

TEST_CASE("matmul reference matches a naive triple loop") {
  Rng rng(55);
  const std::size_t m = 6, k = 11, n = 8;
  auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<double> expect(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) expect[i * n + j] += a[i * k + t] * b[t * n + j];
  std::vector<double> got(m * n);
  kern::scalar_table().matmul(got.data(), a.data(), b.data(), m, k, n);
  for (std::size_t i = 0; i < m * n; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}
