// flattab: few-shot learning across heterogeneous tabular datasets.
//
// Subcommands: train, eval, adapt-eval, export-embeddings, export-attention,
// time, synth. Every flag mirrors a JSON config key; flags override the file.

#include <CLI11.hpp>
#include <cstdio>
#include <json.hpp>
#include <string>

#include "flattab/runner.hpp"

namespace {

struct FlagState {
  std::string config_path;
  nlohmann::json overrides = nlohmann::json::object();
};

// Registers a flag that lands in the override JSON only when the user set it.
template <typename T>
void add_opt(CLI::App* cmd, FlagState& st, const std::string& flag, const std::string& key,
             const std::string& help) {
  auto holder = std::make_shared<T>();
  cmd->add_option_function<T>(
         flag, [&st, key, holder](const T& v) { st.overrides[key] = v; }, help)
      ->expected(1);
}

void add_common(CLI::App* cmd, FlagState& st) {
  cmd->add_option("--config", st.config_path, "JSON config file (flat keys)");
  add_opt<std::string>(cmd, st, "--data-dir", "data_dir", "directory of CSV datasets");
  add_opt<std::string>(cmd, st, "--out", "out_dir", "output directory");
  add_opt<uint64_t>(cmd, st, "--seed", "seed", "root seed (folds, eval tasks)");
  add_opt<std::vector<uint64_t>>(cmd, st, "--seeds", "seeds", "model training seeds");
  add_opt<int>(cmd, st, "--folds", "folds", "dataset fold count");
  add_opt<int>(cmd, st, "--n-classes", "n_classes", "classes per task (2 or more)");
  add_opt<std::string>(cmd, st, "--label-col", "label_col", "label column index or 'last'");
  add_opt<std::string>(cmd, st, "--csv-header", "csv_header", "auto|yes|no");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flattab: few-shot learning for heterogeneous tabular datasets"};
  app.require_subcommand(1);
  FlagState st;

  CLI::App* train = app.add_subcommand("train", "train one model per fold and seed");
  add_common(train, st);
  add_opt<long long>(train, st, "--steps", "steps", "optimizer steps");
  add_opt<int>(train, st, "--batch-size", "batch_size", "tasks per step");
  add_opt<double>(train, st, "--lr", "lr", "learning rate");
  add_opt<double>(train, st, "--eps", "eps", "optimizer epsilon");
  add_opt<double>(train, st, "--weight-decay", "weight_decay", "decoupled weight decay");
  add_opt<int>(train, st, "--n-meta-train", "n_meta_train", "meta rows per training task");
  add_opt<int>(train, st, "--n-target-train", "n_target_train", "target rows per training task");
  add_opt<bool>(train, st, "--column-subsample", "column_subsample", "column augmentation");
  add_opt<double>(train, st, "--theta-value", "theta_value", "initial learnable norm");
  add_opt<std::string>(train, st, "--theta-init", "theta_init", "fixed|recorded");
  add_opt<std::string>(train, st, "--theta-from", "theta_from", "checkpoint for recorded norms");
  add_opt<long long>(train, st, "--log-every", "log_every", "steps between log lines");

  for (const char* name : {"eval", "adapt-eval"}) {
    CLI::App* cmd = app.add_subcommand(name, std::string(name) == "eval"
                                                 ? "cross-dataset evaluation"
                                                 : "evaluation with inference-time adaptation");
    add_common(cmd, st);
    add_opt<int>(cmd, st, "--n-meta", "n_meta", "meta rows per evaluation task");
    add_opt<int>(cmd, st, "--n-target", "n_target", "target rows per evaluation task");
    add_opt<int>(cmd, st, "--tasks-per-dataset", "tasks_per_dataset", "fixed tasks per dataset");
    add_opt<int>(cmd, st, "--knn-k", "knn_k", "k for the KNN baseline");
    add_opt<double>(cmd, st, "--lr-l2", "lr_l2", "L2 strength for the LR baseline");
    add_opt<int>(cmd, st, "--adapt-steps", "adapt_steps", "adaptation steps");
    add_opt<double>(cmd, st, "--adapt-lr-columns", "adapt_lr_columns", "column embedding lr");
    add_opt<double>(cmd, st, "--adapt-lr-dataset", "adapt_lr_dataset", "dataset embedding lr");
  }

  for (const char* name : {"export-embeddings", "export-attention"}) {
    CLI::App* cmd = app.add_subcommand(name, std::string(name) == "export-embeddings"
                                                 ? "write dataset embeddings as CSV"
                                                 : "write first-layer attention maps as CSV");
    add_common(cmd, st);
    add_opt<std::string>(cmd, st, "--checkpoint", "checkpoint", "trained model checkpoint");
    add_opt<int>(cmd, st, "--embed-tasks", "embed_tasks", "tasks sampled per dataset");
    add_opt<int>(cmd, st, "--n-meta", "n_meta", "meta rows per task");
    add_opt<int>(cmd, st, "--n-target", "n_target", "target rows per task");
  }

  CLI::App* time_cmd = app.add_subcommand("time", "inference timing benchmark");
  add_common(time_cmd, st);
  add_opt<std::string>(time_cmd, st, "--checkpoint", "checkpoint", "trained model checkpoint");
  add_opt<int>(time_cmd, st, "--time-tasks", "time_tasks", "tasks per timing point");
  add_opt<int>(time_cmd, st, "--adapt-steps", "adapt_steps", "adaptation steps");

  CLI::App* synth = app.add_subcommand("synth", "generate a rule-based synthetic corpus");
  add_common(synth, st);
  add_opt<int>(synth, st, "--synth-datasets", "synth_datasets", "datasets to generate");
  add_opt<int>(synth, st, "--synth-rows", "synth_rows", "rows per dataset");
  add_opt<int>(synth, st, "--synth-cols", "synth_cols", "maximum columns per dataset");
  add_opt<std::string>(synth, st, "--synth-family", "synth_family", "linear|sign|xor|mix");

  CLI11_PARSE(app, argc, argv);

  try {
    flattab::RunConfig config = flattab::parse_config(st.config_path, st.overrides.dump());
    config.mode = app.get_subcommands().front()->get_name();
    return flattab::run(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "flattab: %s\n", e.what());
    return 1;
  }
}
