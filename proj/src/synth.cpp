#include "flattab/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace flattab {

const char* rule_family_name(RuleFamily f) {
  switch (f) {
    case RuleFamily::linear_pair: return "linear";
    case RuleFamily::sign_col: return "sign";
    case RuleFamily::xor_pair: return "xor";
  }
  return "?";
}

int RuleSpec::label_of(const Tensor& features, std::size_t row) const {
  switch (family) {
    case RuleFamily::linear_pair:
      return w1 * features.at(row, col_a) + w2 * features.at(row, col_b) > t ? 1 : 0;
    case RuleFamily::sign_col:
      return features.at(row, col_a) > 0.0 ? 1 : 0;
    case RuleFamily::xor_pair:
      return (features.at(row, col_a) > ta) != (features.at(row, col_b) > tb) ? 1 : 0;
  }
  return 0;
}

DatasetTable synth_dataset(RuleFamily family, int rows, int cols, uint64_t seed,
                           const std::string& name, RuleSpec* rule_out) {
  if (cols < 2) throw std::invalid_argument("synth_dataset: need at least 2 columns");
  if (rows < 4) throw std::invalid_argument("synth_dataset: need at least 4 rows");
  Rng rng(seed);
  DatasetTable d;
  d.name = name;
  d.n_classes = 2;
  d.features = Tensor({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  for (std::size_t i = 0; i < d.features.size(); ++i) d.features[i] = rng.normal();
  d.labels.resize(static_cast<std::size_t>(rows));

  RuleSpec rule;
  rule.family = family;
  rule.col_a = rng.below(static_cast<uint64_t>(cols));
  rule.col_b = rng.below(static_cast<uint64_t>(cols - 1));
  if (rule.col_b >= rule.col_a) ++rule.col_b;

  switch (family) {
    case RuleFamily::linear_pair: {
      // Unit-norm weights and a modest threshold keep both classes common.
      rule.w1 = rng.uniform(-1.0, 1.0);
      rule.w2 = rng.uniform(-1.0, 1.0);
      const double norm = std::sqrt(rule.w1 * rule.w1 + rule.w2 * rule.w2);
      if (norm < 1e-6) {
        rule.w1 = 1.0;
        rule.w2 = 0.0;
      } else {
        rule.w1 /= norm;
        rule.w2 /= norm;
      }
      rule.t = rng.uniform(-0.5, 0.5);
      break;
    }
    case RuleFamily::sign_col:
      break;
    case RuleFamily::xor_pair:
      rule.ta = rng.uniform(-0.3, 0.3);
      rule.tb = rng.uniform(-0.3, 0.3);
      break;
  }
  for (int i = 0; i < rows; ++i)
    d.labels[static_cast<std::size_t>(i)] = rule.label_of(d.features, static_cast<std::size_t>(i));
  if (rule_out != nullptr) *rule_out = rule;
  return d;
}

namespace {

// Family cycle: half linear thresholds, a quarter sign rules, a quarter xor.
const RuleFamily kMixCycle[4] = {RuleFamily::linear_pair, RuleFamily::sign_col,
                                 RuleFamily::linear_pair, RuleFamily::xor_pair};

}  // namespace

std::vector<DatasetTable> synth_corpus(int n_datasets, int rows, int max_cols, uint64_t seed) {
  return synth_corpus("mix", n_datasets, rows, max_cols, seed);
}

std::vector<DatasetTable> synth_corpus(const std::string& family, int n_datasets, int rows,
                                       int max_cols, uint64_t seed) {
  if (max_cols < 2) throw std::invalid_argument("synth_corpus: max_cols must be at least 2");
  Rng meta_rng(derive_seed(seed, "synth"));
  std::vector<DatasetTable> out;
  for (int i = 0; i < n_datasets; ++i) {
    RuleFamily f;
    if (family == "mix")
      f = kMixCycle[static_cast<std::size_t>(i) % 4];
    else if (family == "linear")
      f = RuleFamily::linear_pair;
    else if (family == "sign")
      f = RuleFamily::sign_col;
    else if (family == "xor")
      f = RuleFamily::xor_pair;
    else
      throw std::invalid_argument("synth_corpus: unknown family '" + family +
                                  "' (use linear|sign|xor|mix)");
    const int cols = 2 + static_cast<int>(meta_rng.below(static_cast<uint64_t>(max_cols - 1)));
    char name[64];
    std::snprintf(name, sizeof(name), "synth_%03d_%s", i, rule_family_name(f));
    out.push_back(synth_dataset(f, rows, cols, meta_rng.next_u64(), name));
  }
  return out;
}

Task perturbed_grid_task(uint64_t seed, double jitter) {
  Rng rng(seed);
  Task t;
  t.source_name = "perturbed_grid";
  t.n_classes = 2;
  t.column_ids = {0, 1};
  t.meta_x = Tensor({16, 2});
  t.meta_y.resize(16);
  // 4x4 grid over [-1.5, 1.5] with jitter; label 1 when x1 > x2.
  std::size_t idx = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c, ++idx) {
      const double x1 = -1.5 + static_cast<double>(c) + rng.uniform(-jitter, jitter);
      const double x2 = -1.5 + static_cast<double>(r) + rng.uniform(-jitter, jitter);
      t.meta_x.at(idx, 0) = x1;
      t.meta_x.at(idx, 1) = x2;
      t.meta_y[idx] = x1 > x2 ? 1 : 0;
    }
  }
  t.target_x = t.meta_x;
  t.target_y = t.meta_y;
  t.meta_rows.resize(16);
  t.target_rows.resize(16);
  for (std::size_t i = 0; i < 16; ++i) {
    t.meta_rows[i] = i;
    t.target_rows[i] = i;
  }
  standardize_joint(t.meta_x, t.target_x);
  return t;
}

}  // namespace flattab
