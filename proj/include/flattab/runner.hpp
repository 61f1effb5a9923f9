#pragma once

#include <string>
#include <vector>

#include "flattab/trainer.hpp"

namespace flattab {

// Everything the CLI can configure, resolved from a JSON config file plus
// flag overrides (flags win). Keys mirror the flags one-to-one.
struct RunConfig {
  std::string mode;  // train | eval | adapt-eval | export-embeddings |
                     // export-attention | time | synth
  std::string data_dir;
  std::string out_dir = "out";
  uint64_t seed = 42;                 // root seed: folds and eval task streams
  std::vector<uint64_t> seeds = {0};  // model training seeds
  int folds = 2;
  int n_classes = 2;

  TrainConfig train;  // train.seed is derived per (fold, model seed)
  std::string theta_init = "fixed";  // fixed | recorded
  std::string theta_from;            // checkpoint supplying recorded norms

  AdaptConfig adapt;
  int n_meta = 10;  // evaluation split sizes
  int n_target = 10;
  int tasks_per_dataset = 200;
  int knn_k = 3;
  double lr_l2 = 1.0;

  int label_col = -1;              // -1 = last column
  std::string csv_header = "auto";  // auto | yes | no
  std::string checkpoint;           // export/time modes

  int synth_datasets = 40;
  int synth_rows = 256;
  int synth_cols = 6;
  std::string synth_family = "mix";
  int embed_tasks = 20;
  int time_tasks = 200;
};

// Parses `config_path` (JSON object with flat keys; empty path or empty file
// allowed) and applies `overrides` (JSON text of the same shape). Unknown
// keys and type mismatches are errors.
RunConfig parse_config(const std::string& config_path, const std::string& overrides_json);

// Executes one mode end to end; returns the process exit code.
int run(const RunConfig& config);

// Loads every *.csv under dir (sorted), applying the label-column and header
// settings plus the class policy (binarize for 2-class runs, top-k reduction
// for multi-class; unusable datasets are skipped with a notice).
std::vector<DatasetTable> load_data_dir(const RunConfig& config);

}  // namespace flattab
