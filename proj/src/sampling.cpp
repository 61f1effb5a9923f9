#include "flattab/sampling.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace flattab {

namespace {

constexpr int kMaxDrawRetries = 100;

[[noreturn]] void too_small(const DatasetTable& d, int n_meta, int n_target) {
  throw std::runtime_error("sample_task: dataset '" + d.name + "' too small for n_meta=" +
                           std::to_string(n_meta) + ", n_target=" + std::to_string(n_target) +
                           " (" + std::to_string(d.rows()) + " rows)");
}

std::vector<std::size_t> choose_columns(std::size_t n_cols, Rng& rng, bool column_subsample) {
  std::vector<std::size_t> ids;
  if (column_subsample && n_cols > 2) {
    const std::size_t keep = 2 + static_cast<std::size_t>(rng.below(n_cols - 1));
    ids = rng.sample_without_replacement(n_cols, keep);
    std::sort(ids.begin(), ids.end());
  } else {
    ids.resize(n_cols);
    for (std::size_t i = 0; i < n_cols; ++i) ids[i] = i;
  }
  return ids;
}

Task assemble(const DatasetTable& d, const std::vector<std::size_t>& meta_rows,
              const std::vector<std::size_t>& target_rows, Rng& rng, bool column_subsample) {
  Task task;
  task.source_name = d.name;
  task.n_classes = d.n_classes;
  task.meta_rows = meta_rows;
  task.target_rows = target_rows;
  task.column_ids = choose_columns(d.cols(), rng, column_subsample);

  const std::size_t c = task.column_ids.size();
  task.meta_x = Tensor({meta_rows.size(), c});
  task.target_x = Tensor({target_rows.size(), c});
  task.meta_y.resize(meta_rows.size());
  std::vector<int> ty(target_rows.size());
  for (std::size_t i = 0; i < meta_rows.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j)
      task.meta_x.at(i, j) = d.features.at(meta_rows[i], task.column_ids[j]);
    task.meta_y[i] = d.labels[meta_rows[i]];
  }
  for (std::size_t i = 0; i < target_rows.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j)
      task.target_x.at(i, j) = d.features.at(target_rows[i], task.column_ids[j]);
    ty[i] = d.labels[target_rows[i]];
  }
  task.target_y = std::move(ty);
  standardize_joint(task.meta_x, task.target_x);
  return task;
}

// Positive count for the meta split: Binomial(n, 0.5), conditioned on class
// coverage when n >= 2.
int draw_meta_positives(int n_meta, Rng& rng) {
  if (n_meta == 1) return rng.binomial(1, 0.5);
  for (int i = 0; i < 100000; ++i) {
    const int k = rng.binomial(n_meta, 0.5);
    if (k >= 1 && k <= n_meta - 1) return k;
  }
  throw std::logic_error("draw_meta_positives: conditioned draw did not terminate");
}

// Draws per-class row sets for a binary episode once the meta/target
// positive counts are fixed. Meta and target come from one joint draw so no
// row repeats anywhere in the episode.
Task binary_episode(const DatasetTable& d, int n_meta, int n_pos_meta, int n_pos_target,
                    int n_target, Rng& rng, bool column_subsample,
                    const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg) {
  const int n_neg_meta = n_meta - n_pos_meta;
  const int n_neg_target = n_target - n_pos_target;
  const auto pick = [&rng](const std::vector<std::size_t>& pool, std::size_t k) {
    std::vector<std::size_t> out;
    for (std::size_t i : rng.sample_without_replacement(pool.size(), k)) out.push_back(pool[i]);
    return out;
  };
  const auto pos_rows = pick(pos, static_cast<std::size_t>(n_pos_meta + n_pos_target));
  const auto neg_rows = pick(neg, static_cast<std::size_t>(n_neg_meta + n_neg_target));

  std::vector<std::size_t> meta_rows(pos_rows.begin(), pos_rows.begin() + n_pos_meta);
  meta_rows.insert(meta_rows.end(), neg_rows.begin(), neg_rows.begin() + n_neg_meta);
  std::vector<std::size_t> target_rows(pos_rows.begin() + n_pos_meta, pos_rows.end());
  target_rows.insert(target_rows.end(), neg_rows.begin() + n_neg_meta, neg_rows.end());
  rng.shuffle(meta_rows);
  rng.shuffle(target_rows);
  return assemble(d, meta_rows, target_rows, rng, column_subsample);
}

}  // namespace

Task sample_task(const DatasetTable& d, int n_meta, int n_target, Rng& rng,
                 bool column_subsample) {
  if (n_meta < 1 || n_target < 1)
    throw std::invalid_argument("sample_task: n_meta and n_target must be positive");
  if (d.rows() < static_cast<std::size_t>(n_meta + n_target)) too_small(d, n_meta, n_target);

  if (d.n_classes != 2) {
    auto rows = rng.sample_without_replacement(d.rows(), static_cast<std::size_t>(n_meta + n_target));
    std::vector<std::size_t> meta_rows(rows.begin(), rows.begin() + n_meta);
    std::vector<std::size_t> target_rows(rows.begin() + n_meta, rows.end());
    return assemble(d, meta_rows, target_rows, rng, column_subsample);
  }

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < d.rows(); ++i) (d.labels[i] == 1 ? pos : neg).push_back(i);

  for (int attempt = 0; attempt < kMaxDrawRetries; ++attempt) {
    const int n_pos_meta = draw_meta_positives(n_meta, rng);
    const int n_pos_target = rng.binomial(n_target, 0.5);
    const std::size_t need_pos = static_cast<std::size_t>(n_pos_meta + n_pos_target);
    const std::size_t need_neg =
        static_cast<std::size_t>((n_meta - n_pos_meta) + (n_target - n_pos_target));
    if (need_pos <= pos.size() && need_neg <= neg.size())
      return binary_episode(d, n_meta, n_pos_meta, n_pos_target, n_target, rng, column_subsample,
                            pos, neg);
  }
  too_small(d, n_meta, n_target);
}

Task sample_task_equal(const DatasetTable& d, int k_shots, int n_target, Rng& rng) {
  if (k_shots < 1) throw std::invalid_argument("sample_task_equal: k_shots must be positive");
  const auto counts = d.class_counts();
  for (int c = 0; c < d.n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] < static_cast<std::size_t>(k_shots))
      throw std::runtime_error("sample_task_equal: dataset '" + d.name + "' class " +
                               std::to_string(c) + " has " +
                               std::to_string(counts[static_cast<std::size_t>(c)]) +
                               " rows, needs " + std::to_string(k_shots));

  if (d.n_classes == 2) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < d.rows(); ++i) (d.labels[i] == 1 ? pos : neg).push_back(i);
    const int n_meta = 2 * k_shots;
    for (int attempt = 0; attempt < kMaxDrawRetries; ++attempt) {
      const int n_pos_target = rng.binomial(n_target, 0.5);
      const std::size_t need_pos = static_cast<std::size_t>(k_shots + n_pos_target);
      const std::size_t need_neg =
          static_cast<std::size_t>(k_shots + (n_target - n_pos_target));
      if (need_pos <= pos.size() && need_neg <= neg.size())
        return binary_episode(d, n_meta, k_shots, n_pos_target, n_target, rng, false, pos, neg);
    }
    too_small(d, n_meta, n_target);
  }

  // K-class: k_shots per class for meta, uniform remainder for target.
  std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(d.n_classes));
  for (std::size_t i = 0; i < d.rows(); ++i)
    per_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
  std::vector<std::size_t> meta_rows;
  std::vector<char> used(d.rows(), 0);
  for (auto& pool : per_class)
    for (std::size_t i : rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(k_shots))) {
      meta_rows.push_back(pool[i]);
      used[pool[i]] = 1;
    }
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < d.rows(); ++i)
    if (!used[i]) remaining.push_back(i);
  if (remaining.size() < static_cast<std::size_t>(n_target))
    too_small(d, static_cast<int>(meta_rows.size()), n_target);
  std::vector<std::size_t> target_rows;
  for (std::size_t i : rng.sample_without_replacement(remaining.size(), static_cast<std::size_t>(n_target)))
    target_rows.push_back(remaining[i]);
  rng.shuffle(meta_rows);
  rng.shuffle(target_rows);
  return assemble(d, meta_rows, target_rows, rng, false);
}

Task sample_task_counts(const DatasetTable& d, int n_meta, int n_pos_meta, int n_target,
                        Rng& rng, bool column_subsample) {
  if (d.n_classes != 2)
    throw std::invalid_argument("sample_task_counts: dataset '" + d.name + "' is not binary");
  if (n_pos_meta < 0 || n_pos_meta > n_meta)
    throw std::invalid_argument("sample_task_counts: n_pos_meta out of range");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < d.rows(); ++i) (d.labels[i] == 1 ? pos : neg).push_back(i);
  for (int attempt = 0; attempt < kMaxDrawRetries; ++attempt) {
    const int n_pos_target = rng.binomial(n_target, 0.5);
    const std::size_t need_pos = static_cast<std::size_t>(n_pos_meta + n_pos_target);
    const std::size_t need_neg =
        static_cast<std::size_t>((n_meta - n_pos_meta) + (n_target - n_pos_target));
    if (need_pos <= pos.size() && need_neg <= neg.size())
      return binary_episode(d, n_meta, n_pos_meta, n_pos_target, n_target, rng, column_subsample,
                            pos, neg);
  }
  too_small(d, n_meta, n_target);
}

std::vector<std::string> FoldPlan::fold_members(int fold) const {
  std::vector<std::string> out;
  for (const auto& [name, f] : fold_of)
    if (f == fold) out.push_back(name);
  return out;
}

FoldPlan make_folds(const std::vector<std::string>& names, int n_folds, Rng& rng) {
  if (n_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  if (static_cast<std::size_t>(n_folds) > names.size())
    throw std::invalid_argument("make_folds: " + std::to_string(n_folds) + " folds but only " +
                                std::to_string(names.size()) + " datasets");
  std::vector<std::string> order = names;
  std::sort(order.begin(), order.end());
  rng.shuffle(order);
  FoldPlan plan;
  plan.n_folds = n_folds;
  for (std::size_t i = 0; i < order.size(); ++i)
    plan.fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  return plan;
}

std::vector<Task> fixed_eval_tasks(const DatasetTable& d, int n_meta, int n_target, int count,
                                   uint64_t seed) {
  Rng rng(derive_seed(seed, d.name));
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  try {
    for (int i = 0; i < count; ++i) tasks.push_back(sample_task(d, n_meta, n_target, rng, false));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[flattab] dataset '%s' skipped for evaluation: %s\n", d.name.c_str(),
                 e.what());
    return {};
  }
  return tasks;
}

}  // namespace flattab
