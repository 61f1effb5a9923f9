#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "flattab/sampling.hpp"
#include "testutil.hpp"

using namespace flattab;
using namespace flattab::testutil;

namespace {

DatasetTable make_binary(std::size_t rows, std::size_t cols, double pos_fraction,
                         uint64_t seed = 0) {
  Rng rng(seed);
  DatasetTable d;
  d.name = "bin" + std::to_string(rows);
  d.features = random_tensor(rng, {rows, cols}, -2.0, 2.0);
  d.labels.resize(rows);
  const std::size_t n_pos = static_cast<std::size_t>(pos_fraction * static_cast<double>(rows));
  for (std::size_t i = 0; i < rows; ++i) d.labels[i] = i < n_pos ? 1 : 0;
  d.n_classes = 2;
  return d;
}

int count_positives(const std::vector<int>& ys) {
  int n = 0;
  for (int y : ys) n += y == 1 ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("meta positive count at n_meta=3 is 1 or 2 with equal frequency") {
  DatasetTable d = make_binary(200, 3, 0.5);
  Rng rng(11);
  int ones = 0, twos = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Task t = sample_task(d, 3, 2, rng, false);
    const int k = count_positives(t.meta_y);
    REQUIRE(k >= 1);
    REQUIRE(k <= 2);
    (k == 1 ? ones : twos)++;
  }
  CHECK(std::fabs(static_cast<double>(ones) / n - 0.5) < 0.02);
  CHECK(std::fabs(static_cast<double>(twos) / n - 0.5) < 0.02);
}

TEST_CASE("n_meta=1 is unconditioned and can be either class") {
  DatasetTable d = make_binary(100, 3, 0.5);
  Rng rng(7);
  bool saw_pos = false, saw_neg = false;
  for (int i = 0; i < 200; ++i) {
    Task t = sample_task(d, 1, 4, rng, false);
    REQUIRE(t.meta_y.size() == 1);
    (t.meta_y[0] == 1 ? saw_pos : saw_neg) = true;
  }
  CHECK(saw_pos);
  CHECK(saw_neg);
}

TEST_CASE("conditional meta distribution matches the renormalized binomial") {
  // 1e5 draws at n_meta=10; chi-squared against Binomial(10, .5) restricted
  // to 1..9. Critical value for p=0.01 with 8 dof is 20.09.
  DatasetTable d = make_binary(400, 2, 0.5);
  Rng rng(123);
  const int n = 100000;
  std::vector<int> counts(11, 0);
  for (int i = 0; i < n; ++i) {
    Task t = sample_task(d, 10, 2, rng, false);
    counts[static_cast<std::size_t>(count_positives(t.meta_y))]++;
  }
  CHECK(counts[0] == 0);
  CHECK(counts[10] == 0);
  double binom[11];
  double mass = 0.0;
  for (int k = 0; k <= 10; ++k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * static_cast<double>(10 - i) / static_cast<double>(i + 1);
    binom[k] = c / 1024.0;
    if (k >= 1 && k <= 9) mass += binom[k];
  }
  double chi2 = 0.0;
  for (int k = 1; k <= 9; ++k) {
    const double expect = static_cast<double>(n) * binom[k] / mass;
    const double diff = static_cast<double>(counts[static_cast<std::size_t>(k)]) - expect;
    chi2 += diff * diff / expect;
  }
  CHECK(chi2 < 20.09);
}

TEST_CASE("meta and target share identical retained columns") {
  DatasetTable d = make_binary(60, 8, 0.5);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Task t = sample_task(d, 5, 5, rng, true);
    CHECK(t.n_cols() >= 2);
    CHECK(t.n_cols() <= 8);
    CHECK(t.meta_x.cols() == t.n_cols());
    CHECK(t.target_x.cols() == t.n_cols());
    std::set<std::size_t> uniq(t.column_ids.begin(), t.column_ids.end());
    CHECK(uniq.size() == t.column_ids.size());
  }
}

TEST_CASE("binary meta splits always cover both classes at n_meta >= 2") {
  DatasetTable d = make_binary(80, 3, 0.3);
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    Task t = sample_task(d, 4, 3, rng, false);
    const int k = count_positives(t.meta_y);
    REQUIRE(k >= 1);
    REQUIRE(k <= 3);
  }
}

TEST_CASE("no row index repeats within an episode") {
  DatasetTable d = make_binary(40, 3, 0.5);
  Rng rng(29);
  for (int i = 0; i < 500; ++i) {
    Task t = sample_task(d, 6, 6, rng, false);
    std::set<std::size_t> seen(t.meta_rows.begin(), t.meta_rows.end());
    seen.insert(t.target_rows.begin(), t.target_rows.end());
    CHECK(seen.size() == t.meta_rows.size() + t.target_rows.size());
  }
}

TEST_CASE("every emitted task is jointly standardized") {
  DatasetTable d = make_binary(50, 4, 0.5);
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    Task t = sample_task(d, 5, 5, rng, true);
    const std::size_t n = t.n_meta() + t.n_target();
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      double total = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < t.n_meta(); ++r) total += t.meta_x.at(r, c);
      for (std::size_t r = 0; r < t.n_target(); ++r) total += t.target_x.at(r, c);
      const double mean = total / static_cast<double>(n);
      for (std::size_t r = 0; r < t.n_meta(); ++r)
        sq += (t.meta_x.at(r, c) - mean) * (t.meta_x.at(r, c) - mean);
      for (std::size_t r = 0; r < t.n_target(); ++r)
        sq += (t.target_x.at(r, c) - mean) * (t.target_x.at(r, c) - mean);
      const double var = sq / static_cast<double>(n);
      CHECK(std::fabs(mean) < 1e-9);
      const bool constant = var < 1e-9;
      if (!constant) CHECK(std::fabs(var - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("equal sampler produces exactly k shots per class") {
  DatasetTable d = make_binary(60, 3, 0.5);
  Rng rng(5);
  Task t1 = sample_task_equal(d, 1, 4, rng);
  CHECK(t1.n_meta() == 2);
  CHECK(count_positives(t1.meta_y) == 1);
  Task t5 = sample_task_equal(d, 5, 4, rng);
  CHECK(t5.n_meta() == 10);
  CHECK(count_positives(t5.meta_y) == 5);
}

TEST_CASE("equal sampler errors when a class is short on rows") {
  DatasetTable d = make_binary(20, 3, 0.15);  // 3 positives
  Rng rng(5);
  CHECK_THROWS_AS(sample_task_equal(d, 5, 4, rng), std::runtime_error);
}

TEST_CASE("fixed-balance sampler honors the requested meta counts") {
  DatasetTable d = make_binary(80, 3, 0.5);
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    Task t = sample_task_counts(d, 10, 9, 5, rng, false);
    CHECK(t.n_meta() == 10);
    CHECK(count_positives(t.meta_y) == 9);
  }
}

TEST_CASE("make_folds balances sizes and is deterministic under a seed") {
  std::vector<std::string> names = {"a", "b", "c", "d"};
  Rng r1(9), r2(9);
  FoldPlan p1 = make_folds(names, 2, r1);
  FoldPlan p2 = make_folds(names, 2, r2);
  CHECK(p1.fold_of == p2.fold_of);
  CHECK(p1.fold_members(0).size() == 2);
  CHECK(p1.fold_members(1).size() == 2);

  std::vector<std::string> five = {"a", "b", "c", "d", "e"};
  Rng r3(9);
  FoldPlan p3 = make_folds(five, 2, r3);
  const auto s0 = p3.fold_members(0).size();
  const auto s1 = p3.fold_members(1).size();
  CHECK(s0 + s1 == 5);
  CHECK(std::max(s0, s1) - std::min(s0, s1) == 1);

  Rng r4(9);
  CHECK_THROWS_AS(make_folds(five, 1, r4), std::invalid_argument);
  CHECK_THROWS_AS(make_folds(five, 6, r4), std::invalid_argument);
}

TEST_CASE("fixed_eval_tasks is reproducible and name-sensitive") {
  DatasetTable d = make_binary(50, 3, 0.5);
  auto t1 = fixed_eval_tasks(d, 5, 5, 20, 99);
  auto t2 = fixed_eval_tasks(d, 5, 5, 20, 99);
  REQUIRE(t1.size() == 20);
  REQUIRE(t2.size() == 20);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].meta_rows == t2[i].meta_rows);
    CHECK(t1[i].target_rows == t2[i].target_rows);
    CHECK(max_abs_diff(t1[i].meta_x, t2[i].meta_x) == 0.0);
  }

  DatasetTable d2 = d;
  d2.name = "other";
  auto t3 = fixed_eval_tasks(d2, 5, 5, 20, 99);
  REQUIRE(t3.size() == 20);
  bool differs = false;
  for (std::size_t i = 0; i < t1.size() && !differs; ++i)
    differs = t1[i].meta_rows != t3[i].meta_rows;
  CHECK(differs);
}

TEST_CASE("fixed_eval_tasks skips datasets that are too small") {
  DatasetTable d = make_binary(6, 3, 0.5);
  auto tasks = fixed_eval_tasks(d, 5, 5, 10, 1);
  CHECK(tasks.empty());
}
