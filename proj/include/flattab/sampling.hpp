#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flattab/dataset.hpp"
#include "flattab/rng.hpp"

namespace flattab {

// One episode: a labeled meta split the model conditions on and a target
// split whose labels are predicted. Both splits share column_ids and are
// jointly standardized.
struct Task {
  std::string source_name;
  Tensor meta_x;  // [n_meta, n_cols]
  std::vector<int> meta_y;
  Tensor target_x;  // [n_target, n_cols]
  std::optional<std::vector<int>> target_y;
  std::vector<std::size_t> column_ids;  // retained source columns
  std::vector<std::size_t> meta_rows;   // source row indices (diagnostics)
  std::vector<std::size_t> target_rows;
  int n_classes = 2;

  std::size_t n_meta() const { return meta_y.size(); }
  std::size_t n_target() const { return target_x.rank() == 2 ? target_x.rows() : 0; }
  std::size_t n_cols() const { return column_ids.size(); }
};

// Binomial episodic sampler. For binary datasets the meta split's positive
// count is drawn Binomial(n_meta, 0.5), conditioned on at least one example
// per class when n_meta >= 2 (unconditioned when n_meta == 1); target
// positives are Binomial(n_target, 0.5) unconditioned. Rows are drawn
// without replacement across the whole episode. Draws that the dataset
// cannot honor are re-drawn, bounded at 100 retries. When column_subsample
// is set, a uniform count in [2, n_cols] of uniformly chosen columns is
// retained, identical for both splits. Standardization is applied last.
//
// Datasets with 3+ classes sample rows uniformly without replacement (the
// per-class count scheme is binary-only).
Task sample_task(const DatasetTable& d, int n_meta, int n_target, Rng& rng,
                 bool column_subsample);

// Classic K-shot episode: exactly k_shots meta rows per class; the target
// split is sampled as in sample_task.
Task sample_task_equal(const DatasetTable& d, int k_shots, int n_target, Rng& rng);

// Fixed meta balance (binary only): exactly n_pos_meta positives and
// n_meta - n_pos_meta negatives in the meta split.
Task sample_task_counts(const DatasetTable& d, int n_meta, int n_pos_meta, int n_target,
                        Rng& rng, bool column_subsample);

struct FoldPlan {
  std::map<std::string, int> fold_of;
  int n_folds = 0;

  std::vector<std::string> fold_members(int fold) const;
};

// Random balanced partition (sizes differ by at most one), deterministic
// under a fixed generator.
FoldPlan make_folds(const std::vector<std::string>& names, int n_folds, Rng& rng);

// Exactly `count` evaluation tasks from a dedicated generator seeded by
// (seed, dataset name), so sequences are identical across runs and models
// and never use column subsampling. A dataset too small for the requested
// sizes is skipped with a logged notice and yields an empty list.
std::vector<Task> fixed_eval_tasks(const DatasetTable& d, int n_meta, int n_target, int count,
                                   uint64_t seed);

}  // namespace flattab
