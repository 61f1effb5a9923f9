#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flattab/gatnet.hpp"
#include "flattab/model.hpp"
#include "flattab/optim.hpp"
#include "flattab/sampling.hpp"

namespace flattab {

struct TrainConfig {
  long long steps = 62000;
  int batch_size = 3;  // tasks per step, gradients averaged
  double lr = 5e-4;
  double eps = 3e-4;
  double weight_decay = 1e-4;
  int n_meta = 10;
  int n_target = 10;
  bool column_subsample = true;
  uint64_t seed = 0;
  long long log_every = 500;
  // Initial learnable-norm value; overridden when a recorded theta source is
  // supplied to train_loop.
  double theta_value = 1.0;

  void validate() const;
};

// Inference-time refinement of the dataset and column embeddings on the meta
// split. Model weights stay frozen; the two embedding groups use their own
// Adam learning rates.
struct AdaptConfig {
  int steps = 5;
  double lr_columns = 1e-3;
  double lr_dataset = 7.5e-2;

  void validate() const;
};

struct Checkpoint {
  int format_version = 1;
  ModelParams params;
  TrainConfig train_cfg;
  AdamW opt;
  Rng data_rng;
  long long step = 0;
  std::vector<std::string> train_dataset_names;
};

// Versioned binary container: JSON manifest of named tensor shapes followed
// by raw little-endian 64-bit floats. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Mean negative log-probability of the true class; probabilities below 1e-12
// are clamped before the log.
Var cross_entropy(Tape& tape, Var probs, const std::vector<int>& labels);

struct TaskForward {
  Var loss;
  Var probs;
  Var e;
  Var p;
};

// Full episode forward: encode the meta split, generate weights, predict the
// target rows, score against the target labels (which must be present).
TaskForward task_forward(Tape& tape, const BoundModel& m, const Task& task,
                         const ModelConfig& cfg, AttentionCapture* capture = nullptr);

// One AdamW update from a batch of tasks with the batch-mean loss. A
// non-finite loss skips the update (logged) and is still returned.
double train_step(const std::vector<Task>& batch, ModelParams& params, AdamW& opt);

// Episodic training: each step samples batch_size tasks (uniform dataset
// choice, then the binomial sampler) and applies train_step. Emits one JSON
// line per log_every steps when `log` is given. Training continues from
// `resume_from` when provided (bit-identical to an uninterrupted run).
Checkpoint train_loop(const std::vector<DatasetTable>& train_datasets, const TrainConfig& cfg,
                      const ModelConfig& mcfg, std::ostream* log = nullptr,
                      const Checkpoint* resume_from = nullptr,
                      const ModelParams* theta_from = nullptr);

struct Prediction {
  std::vector<int> labels;  // argmax per target row, ties toward lower index
  Tensor probs;             // [n_target, n_classes]
  Tensor e;                 // embeddings the prediction used
  Tensor p;
};

Prediction infer(const Task& task, const ModelParams& params);
Prediction flatadapt_infer(const Task& task, const ModelParams& params,
                           const AdaptConfig& adapt);

double task_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace flattab
