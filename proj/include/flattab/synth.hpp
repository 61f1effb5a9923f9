#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flattab/dataset.hpp"
#include "flattab/sampling.hpp"

namespace flattab {

// Seeded rule families for desk-scale corpora. Features are iid standard
// normal; labels follow the rule exactly (no label noise).
enum class RuleFamily {
  linear_pair,  // w1*x_a + w2*x_b > t over a random column pair
  sign_col,     // x_a > 0
  xor_pair,     // (x_a > t_a) xor (x_b > t_b)
};

const char* rule_family_name(RuleFamily f);

// The drawn rule, exposed so callers can re-verify generated labels.
struct RuleSpec {
  RuleFamily family;
  std::size_t col_a = 0, col_b = 0;
  double w1 = 0.0, w2 = 0.0, t = 0.0;  // linear_pair
  double ta = 0.0, tb = 0.0;           // xor_pair

  int label_of(const Tensor& features, std::size_t row) const;
};

DatasetTable synth_dataset(RuleFamily family, int rows, int cols, uint64_t seed,
                           const std::string& name, RuleSpec* rule_out = nullptr);

// Corpus cycling through the families (weighted toward linear thresholds);
// each dataset's column count is drawn uniformly in [2, max_cols].
std::vector<DatasetTable> synth_corpus(int n_datasets, int rows, int max_cols, uint64_t seed);

// Same mix restricted to one family when requested by name ("linear",
// "sign", "xor"); "mix" gives the weighted cycle.
std::vector<DatasetTable> synth_corpus(const std::string& family, int n_datasets, int rows,
                                       int max_cols, uint64_t seed);

// The qualitative boundary probe: a perturbed 4x4 grid in 2-D labeled by
// x1 > x2, packaged as a task whose meta and target splits are the same 16
// points (jointly standardized).
Task perturbed_grid_task(uint64_t seed, double jitter = 0.15);

}  // namespace flattab
