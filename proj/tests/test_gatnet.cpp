#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "flattab/encoder.hpp"
#include "flattab/gatnet.hpp"
#include "modelutil.hpp"
#include "straightline_oracle.hpp"

using namespace flattab;
using namespace flattab::testutil;

namespace {

Tensor run_full_predict(const ModelParams& params, const Task& t,
                        AttentionCapture* cap = nullptr) {
  Tape tape(false);
  BoundModel m = bind_model(tape, params);
  Var pooled = pool_rows(tape, m, t.meta_x, t.meta_y, params.cfg);
  Var e = encode_dataset(tape, m, pooled);
  Var p = encode_columns(tape, m, pooled);
  GeneratedWeights gw = generate_weights(tape, m, e, params.cfg);
  return tape.val(predict_probs(tape, t.target_x, p, gw, params.cfg, cap));
}

}  // namespace

TEST_CASE("build_nodes concatenates column embeddings with feature values") {
  Tape tape(false);
  Var p = tape.leaf(Tensor({2, 15}));  // zero embeddings
  Var nodes = build_nodes(tape, p, vec({1.0, -1.0}));
  const Tensor& nv = tape.val(nodes);
  REQUIRE(nv.rows() == 2);
  REQUIRE(nv.cols() == 16);
  for (std::size_t j = 0; j < 15; ++j) {
    CHECK(nv.at(0, j) == 0.0);
    CHECK(nv.at(1, j) == 0.0);
  }
  CHECK(nv.at(0, 15) == 1.0);
  CHECK(nv.at(1, 15) == -1.0);
}

TEST_CASE("build_nodes respects joint permutations and small dims") {
  Rng rng(1);
  Tape tape(false);
  Tensor pv = random_tensor(rng, {2, 3});
  Tensor x = vec({0.4, -0.9});
  Var nodes = tape.leaf(Tensor());
  {
    Var p = tape.leaf(pv);
    nodes = build_nodes(tape, p, x);
  }
  const Tensor& nv = tape.val(nodes);
  REQUIRE(nv.cols() == 4);
  CHECK(nv.at(0, 0) == pv.at(0, 0));
  CHECK(nv.at(0, 3) == 0.4);
  CHECK(nv.at(1, 3) == -0.9);

  // Permuting columns and embedding rows together permutes the nodes.
  Tensor pv_swap({2, 3});
  for (std::size_t j = 0; j < 3; ++j) {
    pv_swap.at(0, j) = pv.at(1, j);
    pv_swap.at(1, j) = pv.at(0, j);
  }
  Var p2 = tape.leaf(pv_swap);
  Var nodes2 = build_nodes(tape, p2, vec({-0.9, 0.4}));
  const Tensor& nv2 = tape.val(nodes2);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(nv2.at(0, j) == nv.at(1, j));
    CHECK(nv2.at(1, j) == nv.at(0, j));
  }
}

TEST_CASE("attention over identical nodes is uniform") {
  Rng rng(2);
  Tape tape(false);
  Tensor one_row = random_tensor(rng, {1, 4});
  Tensor nodes_v({3, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) nodes_v.at(i, j) = one_row.at(0, j);
  Var nodes = tape.leaf(nodes_v);
  Var a = tape.leaf(random_tensor(rng, {4}));
  Var w = tape.leaf(random_tensor(rng, {2, 4}));
  const Tensor& alpha = tape.val(attention_coeffs(tape, nodes, a, w));
  for (std::size_t i = 0; i < alpha.size(); ++i)
    CHECK(alpha[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("zero attention vector gives uniform coefficients for any nodes") {
  Rng rng(3);
  Tape tape(false);
  Var nodes = tape.leaf(random_tensor(rng, {4, 5}));
  Var a = tape.leaf(Tensor({6}));
  Var w = tape.leaf(random_tensor(rng, {3, 5}));
  const Tensor& alpha = tape.val(attention_coeffs(tape, nodes, a, w));
  for (std::size_t i = 0; i < alpha.size(); ++i)
    CHECK(alpha[i] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("three-node attention matches a direct evaluation") {
  Tape tape(false);
  Tensor nodes_v = mat(3, 2, {1.0, 0.0, 0.0, 1.0, -0.5, 0.5});
  Tensor w_v = mat(2, 2, {0.3, -0.2, 0.7, 0.4});
  Tensor a_v = vec({0.5, -1.0, 0.25, 0.8});
  Var alpha = attention_coeffs(tape, tape.leaf(nodes_v), tape.leaf(a_v), tape.leaf(w_v));

  // Straight evaluation of the same attention definition.
  double wh[3][2];
  for (int j = 0; j < 3; ++j)
    for (int o = 0; o < 2; ++o)
      wh[j][o] = w_v.at(static_cast<std::size_t>(o), 0) * nodes_v.at(static_cast<std::size_t>(j), 0) +
                 w_v.at(static_cast<std::size_t>(o), 1) * nodes_v.at(static_cast<std::size_t>(j), 1);
  for (int j = 0; j < 3; ++j) {
    double logits[3];
    for (int k = 0; k < 3; ++k) {
      const double z = a_v[0] * wh[j][0] + a_v[1] * wh[j][1] + a_v[2] * wh[k][0] + a_v[3] * wh[k][1];
      logits[k] = z > 0 ? z : 0.2 * z;
    }
    const double mx = std::max({logits[0], logits[1], logits[2]});
    double total = 0.0;
    double ex[3];
    for (int k = 0; k < 3; ++k) {
      ex[k] = std::exp(logits[k] - mx);
      total += ex[k];
    }
    for (int k = 0; k < 3; ++k)
      CHECK(tape.val(alpha).at(static_cast<std::size_t>(j), static_cast<std::size_t>(k)) ==
            doctest::Approx(ex[k] / total).epsilon(1e-12));
  }
}

TEST_CASE("attention rows sum to one") {
  Rng rng(4);
  Tape tape(false);
  for (int trial = 0; trial < 20; ++trial) {
    Var nodes = tape.leaf(random_tensor(rng, {5, 3}));
    Var a = tape.leaf(random_tensor(rng, {4}));
    Var w = tape.leaf(random_tensor(rng, {2, 3}));
    const Tensor& alpha = tape.val(attention_coeffs(tape, nodes, a, w));
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += alpha.at(j, k);
      CHECK(std::fabs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("a single node reduces the layer to W h plus bias") {
  Rng rng(5);
  Tape tape(false);
  Tensor node_v = random_tensor(rng, {1, 3});
  Tensor w_v = random_tensor(rng, {2, 3});
  Tensor b_v = random_tensor(rng, {2});
  Var out = gat_layer(tape, tape.leaf(node_v), {tape.leaf(random_tensor(rng, {4}))},
                      {tape.leaf(b_v)}, {tape.leaf(w_v)});
  const Tensor& ov = tape.val(out);
  for (int o = 0; o < 2; ++o) {
    double expect = b_v[static_cast<std::size_t>(o)];
    for (int i = 0; i < 3; ++i)
      expect += w_v.at(static_cast<std::size_t>(o), static_cast<std::size_t>(i)) *
                node_v.at(0, static_cast<std::size_t>(i));
    CHECK(ov.at(0, static_cast<std::size_t>(o)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("identical nodes produce identical layer outputs") {
  Rng rng(6);
  Tape tape(false);
  Tensor row = random_tensor(rng, {1, 4});
  Tensor nodes_v({3, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) nodes_v.at(i, j) = row.at(0, j);
  Var out = gat_layer(tape, tape.leaf(nodes_v), {tape.leaf(random_tensor(rng, {4}))},
                      {tape.leaf(random_tensor(rng, {2}))}, {tape.leaf(random_tensor(rng, {2, 4}))});
  const Tensor& ov = tape.val(out);
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t j = 0; j < ov.cols(); ++j) CHECK(ov.at(i, j) == ov.at(0, j));
}

TEST_CASE("two-node layer matches a hand computation") {
  Tape tape(false);
  Tensor nodes_v = mat(2, 2, {0.6, -0.2, 0.1, 0.9});
  Tensor w_v = mat(1, 2, {0.5, -0.4});
  Tensor a_v = vec({1.0, -0.5});
  Tensor b_v = vec({0.3});
  Var out = gat_layer(tape, tape.leaf(nodes_v), {tape.leaf(a_v)}, {tape.leaf(b_v)},
                      {tape.leaf(w_v)});

  const double wh0 = 0.5 * 0.6 + -0.4 * -0.2;   // 0.38
  const double wh1 = 0.5 * 0.1 + -0.4 * 0.9;    // -0.31
  auto lrelu = [](double z) { return z > 0 ? z : 0.2 * z; };
  for (int j = 0; j < 2; ++j) {
    const double uj = 1.0 * (j == 0 ? wh0 : wh1);
    const double z0 = lrelu(uj + -0.5 * wh0);
    const double z1 = lrelu(uj + -0.5 * wh1);
    const double mx = std::max(z0, z1);
    const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    const double expect = a0 * wh0 + a1 * wh1 + 0.3;
    CHECK(tape.val(out).at(static_cast<std::size_t>(j), 0) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("probability rows sum to one for random tasks") {
  Rng rng(7);
  ModelParams params = ModelParams::init(tiny_config(), rng);
  for (int trial = 0; trial < 10; ++trial) {
    Task t = random_task(rng, 4, 5, 3);
    Tensor probs = run_full_predict(params, t);
    REQUIRE(probs.rows() == 5);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < probs.cols(); ++k) s += probs.at(i, k);
      CHECK(std::fabs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("joint column permutation leaves predictions unchanged") {
  Rng rng(8);
  ModelParams params = ModelParams::init(tiny_config(), rng);
  for (int trial = 0; trial < 10; ++trial) {
    Task t = random_task(rng, 4, 3, 4);
    Tensor probs = run_full_predict(params, t);

    std::vector<std::size_t> perm = {2, 0, 3, 1};
    Task tp = t;
    for (std::size_t i = 0; i < t.meta_x.rows(); ++i)
      for (std::size_t j = 0; j < 4; ++j) tp.meta_x.at(i, j) = t.meta_x.at(i, perm[j]);
    for (std::size_t i = 0; i < t.target_x.rows(); ++i)
      for (std::size_t j = 0; j < 4; ++j) tp.target_x.at(i, j) = t.target_x.at(i, perm[j]);
    Tensor probs_p = run_full_predict(params, tp);
    CHECK(max_abs_diff(probs, probs_p) <= 1e-9);
  }
}

TEST_CASE("each target row's prediction ignores the other rows") {
  Rng rng(9);
  ModelParams params = ModelParams::init(tiny_config(), rng);
  Task t = random_task(rng, 4, 3, 3);
  Tensor probs = run_full_predict(params, t);

  Task t2 = t;
  // Perturb rows 1 and 2 only; row 0's input and the meta split (hence the
  // shared standardization... which would change!) must stay fixed, so edit
  // the already standardized matrix directly.
  t2.target_x.at(1, 0) += 0.5;
  t2.target_x.at(2, 1) -= 0.25;
  Tensor probs2 = run_full_predict(params, t2);
  for (std::size_t k = 0; k < probs.cols(); ++k) CHECK(probs.at(0, k) == probs2.at(0, k));
}

TEST_CASE("full pipeline matches the straight-line oracle on a toy task") {
  Rng rng(10);
  ModelParams params = ModelParams::init(tiny_config(), rng);
  Task t = random_task(rng, 1, 1, 2);
  AttentionCapture cap;
  Tensor probs = run_full_predict(params, t, &cap);

  oracle::SlModel sl = oracle::convert(params);
  oracle::SlResult ref = oracle::evaluate(sl, oracle::to_mat(t.meta_x), t.meta_y,
                                          oracle::to_mat(t.target_x));
  REQUIRE(ref.probs.size() == 1);
  for (std::size_t k = 0; k < probs.cols(); ++k)
    CHECK(probs.at(0, k) == doctest::Approx(ref.probs[0][k]).epsilon(1e-10));
  REQUIRE(cap.alpha.size() == 1);  // one row, one head
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(cap.alpha[0].at(j, k) == doctest::Approx(ref.alpha0[0][0][j][k]).epsilon(1e-10));
}

TEST_CASE("row rollback returns the same probabilities with a smaller tape") {
  Rng rng(11);
  ModelParams params = ModelParams::init(tiny_config(), rng);
  Task t = random_task(rng, 4, 6, 3);

  Tape full(false);
  BoundModel m1 = bind_model(full, params);
  Var pooled1 = pool_rows(full, m1, t.meta_x, t.meta_y, params.cfg);
  Var e1 = encode_dataset(full, m1, pooled1);
  Var p1 = encode_columns(full, m1, pooled1);
  GeneratedWeights g1 = generate_weights(full, m1, e1, params.cfg);
  Tensor probs_full = full.val(predict_probs(full, t.target_x, p1, g1, params.cfg));
  const std::size_t full_nodes = full.size();

  Tape lean(false);
  BoundModel m2 = bind_model(lean, params);
  Var pooled2 = pool_rows(lean, m2, t.meta_x, t.meta_y, params.cfg);
  Var e2 = encode_dataset(lean, m2, pooled2);
  Var p2 = encode_columns(lean, m2, pooled2);
  GeneratedWeights g2 = generate_weights(lean, m2, e2, params.cfg);
  Tensor probs_lean = lean.val(predict_probs(lean, t.target_x, p2, g2, params.cfg, nullptr, true));
  CHECK(max_abs_diff(probs_full, probs_lean) == 0.0);
  CHECK(lean.size() < full_nodes);
}

TEST_CASE("prediction cost grows at most quadratically in columns") {
  Rng rng(12);
  ModelParams params = ModelParams::init(ModelConfig{}, rng);
  auto time_at = [&](std::size_t n_cols) {
    Task t = random_task(rng, 8, 8, n_cols);
    double best = 1e100;
    for (int rep = 0; rep < 3; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      run_full_predict(params, t);
      const auto stop = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(stop - start).count());
    }
    return best;
  };
  const std::size_t cols[] = {10, 20, 40};
  double ratio[3];
  for (int i = 0; i < 3; ++i) ratio[i] = time_at(cols[i]) / static_cast<double>(cols[i] * cols[i]);
  // Every point within a 3x band of the geometric mean of t/n^2.
  const double center = std::cbrt(ratio[0] * ratio[1] * ratio[2]);
  for (int i = 0; i < 3; ++i) {
    CHECK(ratio[i] < 3.0 * center);
    CHECK(ratio[i] > center / 3.0);
  }
}
