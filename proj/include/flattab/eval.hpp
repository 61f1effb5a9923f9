#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flattab/sampling.hpp"
#include "flattab/trainer.hpp"

namespace flattab {

// Anything that can be scored on an episode. Returning nullopt abstains on
// that task (the convention for supervised baselines facing a single-class
// meta split).
class TaskModel {
 public:
  virtual ~TaskModel() = default;
  virtual std::string name() const = 0;
  virtual std::optional<std::vector<int>> predict(const Task& task) const = 0;
};

struct EvalRow {
  std::string model;
  std::string dataset;
  int n_meta = 0;
  double accuracy = 0.0;
  double std_error = 0.0;
  int n_tasks = 0;
};

struct ModelSummary {
  std::string model;
  double mean_accuracy = 0.0;
  double median_rank = 0.0;
  int n_datasets = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<ModelSummary> summary;

  std::string to_csv() const;
  std::string summary_json() const;
};

struct EvalOptions {
  int n_meta = 10;
  int n_target = 10;
  int tasks_per_dataset = 200;
  uint64_t seed = 0;  // shared across models so task sequences are identical
  bool with_flatadapt = false;
  AdaptConfig adapt;
  bool with_baselines = true;
  int knn_k = 3;
  double lr_l2 = 1.0;
};

// Cross-dataset evaluation: each fold's datasets are scored with that fold's
// checkpoints (one per training seed; per-task accuracies averaged across
// seeds) against the bundled baselines on identical fixed task sequences.
// Throws if any checkpoint saw one of its fold's test datasets in training.
EvalReport run_fold_eval(const std::vector<DatasetTable>& datasets, const FoldPlan& plan,
                         const std::map<int, std::vector<const Checkpoint*>>& fold_models,
                         const EvalOptions& opts,
                         const std::vector<const TaskModel*>& extra_models = {});

struct TimingRow {
  std::string model;
  int n_cols = 0;
  double seconds = 0.0;
  int n_tasks = 0;
};

// Fixed evaluation episodes over a synthetic linear-rule dataset with the
// requested column count; meta splits always contain both classes.
std::vector<Task> make_timing_tasks(int n_tasks, int n_meta, int n_target, int n_cols,
                                    uint64_t seed);

// Wall-clock seconds to run `fn` over every task (task generation excluded).
double time_inference(const std::function<void(const Task&)>& fn,
                      const std::vector<Task>& tasks);

std::string timing_csv(const std::vector<TimingRow>& rows);

}  // namespace flattab
