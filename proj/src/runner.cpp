#include "flattab/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flattab/baselines.hpp"
#include "flattab/eval.hpp"
#include "flattab/exports.hpp"
#include "flattab/synth.hpp"

namespace flattab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kValidKeys = {
    "data_dir",      "out_dir",        "seed",           "seeds",
    "folds",         "n_classes",      "steps",          "batch_size",
    "lr",            "eps",            "weight_decay",   "n_meta_train",
    "n_target_train", "column_subsample", "theta_value",  "theta_init",
    "theta_from",    "log_every",      "adapt_steps",    "adapt_lr_columns",
    "adapt_lr_dataset", "n_meta",      "n_target",       "tasks_per_dataset",
    "knn_k",         "lr_l2",          "label_col",      "csv_header",
    "checkpoint",    "synth_datasets", "synth_rows",     "synth_cols",
    "synth_family",  "embed_tasks",    "time_tasks",
};

void apply_json(RunConfig& c, const json& j) {
  for (const auto& [key, value] : j.items()) {
    if (kValidKeys.find(key) == kValidKeys.end()) {
      std::string valid;
      for (const std::string& k : kValidKeys) valid += valid.empty() ? k : ", " + k;
      throw std::invalid_argument("config: unknown key '" + key + "'; valid keys: " + valid);
    }
    try {
      if (key == "data_dir") c.data_dir = value.get<std::string>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else if (key == "seed") c.seed = value.get<uint64_t>();
      else if (key == "seeds") c.seeds = value.get<std::vector<uint64_t>>();
      else if (key == "folds") c.folds = value.get<int>();
      else if (key == "n_classes") c.n_classes = value.get<int>();
      else if (key == "steps") c.train.steps = value.get<long long>();
      else if (key == "batch_size") c.train.batch_size = value.get<int>();
      else if (key == "lr") c.train.lr = value.get<double>();
      else if (key == "eps") c.train.eps = value.get<double>();
      else if (key == "weight_decay") c.train.weight_decay = value.get<double>();
      else if (key == "n_meta_train") c.train.n_meta = value.get<int>();
      else if (key == "n_target_train") c.train.n_target = value.get<int>();
      else if (key == "column_subsample") c.train.column_subsample = value.get<bool>();
      else if (key == "theta_value") c.train.theta_value = value.get<double>();
      else if (key == "theta_init") c.theta_init = value.get<std::string>();
      else if (key == "theta_from") c.theta_from = value.get<std::string>();
      else if (key == "log_every") c.train.log_every = value.get<long long>();
      else if (key == "adapt_steps") c.adapt.steps = value.get<int>();
      else if (key == "adapt_lr_columns") c.adapt.lr_columns = value.get<double>();
      else if (key == "adapt_lr_dataset") c.adapt.lr_dataset = value.get<double>();
      else if (key == "n_meta") c.n_meta = value.get<int>();
      else if (key == "n_target") c.n_target = value.get<int>();
      else if (key == "tasks_per_dataset") c.tasks_per_dataset = value.get<int>();
      else if (key == "knn_k") c.knn_k = value.get<int>();
      else if (key == "lr_l2") c.lr_l2 = value.get<double>();
      else if (key == "label_col") {
        if (value.is_string()) {
          if (value.get<std::string>() != "last")
            throw std::invalid_argument("label_col accepts an index or \"last\"");
          c.label_col = -1;
        } else {
          c.label_col = value.get<int>();
        }
      } else if (key == "csv_header") c.csv_header = value.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = value.get<std::string>();
      else if (key == "synth_datasets") c.synth_datasets = value.get<int>();
      else if (key == "synth_rows") c.synth_rows = value.get<int>();
      else if (key == "synth_cols") c.synth_cols = value.get<int>();
      else if (key == "synth_family") c.synth_family = value.get<std::string>();
      else if (key == "embed_tasks") c.embed_tasks = value.get<int>();
      else if (key == "time_tasks") c.time_tasks = value.get<int>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
    }
  }
}

HasHeader header_mode(const RunConfig& c) {
  if (c.csv_header == "auto") return HasHeader::detect;
  if (c.csv_header == "yes") return HasHeader::yes;
  if (c.csv_header == "no") return HasHeader::no;
  throw std::invalid_argument("config: csv_header must be auto|yes|no, got '" + c.csv_header +
                              "'");
}

std::string ckpt_path(const RunConfig& c, int fold, uint64_t seed) {
  return c.out_dir + "/model_fold" + std::to_string(fold) + "_seed" + std::to_string(seed) +
         ".ckpt";
}

FoldPlan shared_fold_plan(const RunConfig& c, const std::vector<DatasetTable>& data) {
  std::vector<std::string> names;
  for (const DatasetTable& d : data) names.push_back(d.name);
  Rng fold_rng(derive_seed(c.seed, "folds"));
  return make_folds(names, c.folds, fold_rng);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

int run_train(const RunConfig& c) {
  const auto data = load_data_dir(c);
  const FoldPlan plan = shared_fold_plan(c, data);
  fs::create_directories(c.out_dir);

  ModelParams theta_source;
  bool have_theta_source = false;
  if (c.theta_init == "recorded") {
    if (c.theta_from.empty())
      throw std::invalid_argument("theta_init=recorded requires theta_from=<checkpoint>");
    theta_source = load_checkpoint(c.theta_from).params;
    have_theta_source = true;
  } else if (c.theta_init != "fixed") {
    throw std::invalid_argument("theta_init must be fixed|recorded, got '" + c.theta_init + "'");
  }

  ModelConfig mcfg;
  mcfg.n_classes = c.n_classes;
  for (int fold = 0; fold < c.folds; ++fold) {
    std::vector<DatasetTable> train_sets;
    for (const DatasetTable& d : data)
      if (plan.fold_of.at(d.name) != fold) train_sets.push_back(d);
    for (uint64_t model_seed : c.seeds) {
      TrainConfig tc = c.train;
      tc.seed = derive_seed(model_seed, "fold" + std::to_string(fold));
      const std::string log_path = c.out_dir + "/train_log_fold" + std::to_string(fold) +
                                   "_seed" + std::to_string(model_seed) + ".jsonl";
      std::ofstream log(log_path);
      Checkpoint ckpt = train_loop(train_sets, tc, mcfg, &log, nullptr,
                                   have_theta_source ? &theta_source : nullptr);
      save_checkpoint(ckpt, ckpt_path(c, fold, model_seed));
    }
  }
  return 0;
}

int run_eval(const RunConfig& c, bool with_adapt) {
  const auto data = load_data_dir(c);
  const FoldPlan plan = shared_fold_plan(c, data);
  fs::create_directories(c.out_dir);

  std::vector<Checkpoint> storage;
  storage.reserve(static_cast<std::size_t>(c.folds) * c.seeds.size());
  std::map<int, std::vector<const Checkpoint*>> fold_models;
  for (int fold = 0; fold < c.folds; ++fold) {
    for (uint64_t model_seed : c.seeds) {
      const std::string path = ckpt_path(c, fold, model_seed);
      if (!fs::exists(path))
        throw std::runtime_error("eval: missing checkpoint '" + path +
                                 "' (train this fold/seed first)");
      storage.push_back(load_checkpoint(path));
    }
  }
  std::size_t idx = 0;
  for (int fold = 0; fold < c.folds; ++fold)
    for (std::size_t s = 0; s < c.seeds.size(); ++s) fold_models[fold].push_back(&storage[idx++]);

  EvalOptions opts;
  opts.n_meta = c.n_meta;
  opts.n_target = c.n_target;
  opts.tasks_per_dataset = c.tasks_per_dataset;
  opts.seed = derive_seed(c.seed, "eval");
  opts.with_flatadapt = with_adapt;
  opts.adapt = c.adapt;
  opts.knn_k = c.knn_k;
  opts.lr_l2 = c.lr_l2;

  const EvalReport report = run_fold_eval(data, plan, fold_models, opts);
  write_file(c.out_dir + "/report.csv", report.to_csv());
  write_file(c.out_dir + "/report_summary.json", report.summary_json());
  return 0;
}

int run_export(const RunConfig& c, bool attention) {
  if (c.checkpoint.empty())
    throw std::invalid_argument("export modes require checkpoint=<path>");
  const auto data = load_data_dir(c);
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  fs::create_directories(c.out_dir);
  const uint64_t seed = derive_seed(c.seed, "eval");
  std::ostringstream out;
  if (attention)
    export_attention_csv(out, ckpt.params, data, c.embed_tasks, c.n_meta, c.n_target, seed);
  else
    export_embeddings_csv(out, ckpt.params, data, c.embed_tasks, c.n_meta, c.n_target, seed);
  write_file(c.out_dir + (attention ? "/attention.csv" : "/embeddings.csv"), out.str());
  return 0;
}

int run_time(const RunConfig& c) {
  if (c.checkpoint.empty()) throw std::invalid_argument("time mode requires checkpoint=<path>");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  fs::create_directories(c.out_dir);

  std::vector<TimingRow> rows;
  const int col_points[] = {10, 20, 40, 80, 160, 400};
  for (int n_cols : col_points) {
    const auto tasks = make_timing_tasks(c.time_tasks, 15, 15, n_cols, derive_seed(c.seed, "time"));
    rows.push_back({"flat", n_cols,
                    time_inference([&](const Task& t) { infer(t, ckpt.params); }, tasks),
                    c.time_tasks});
    rows.push_back({"flatadapt", n_cols,
                    time_inference(
                        [&](const Task& t) { flatadapt_infer(t, ckpt.params, c.adapt); }, tasks),
                    c.time_tasks});
    rows.push_back({"lr", n_cols,
                    time_inference([&](const Task& t) { baseline_lr(t, c.lr_l2); }, tasks),
                    c.time_tasks});
    rows.push_back({"knn", n_cols,
                    time_inference(
                        [&](const Task& t) {
                          baseline_knn(t, std::min<int>(c.knn_k, static_cast<int>(t.n_meta())));
                        },
                        tasks),
                    c.time_tasks});
  }
  write_file(c.out_dir + "/timing.csv", timing_csv(rows));
  return 0;
}

int run_synth(const RunConfig& c) {
  fs::create_directories(c.out_dir);
  const auto corpus =
      synth_corpus(c.synth_family, c.synth_datasets, c.synth_rows, c.synth_cols, c.seed);
  for (const DatasetTable& d : corpus) write_csv(d, c.out_dir + "/" + d.name + ".csv");
  return 0;
}

}  // namespace

std::vector<DatasetTable> load_data_dir(const RunConfig& c) {
  if (c.data_dir.empty()) throw std::invalid_argument("data_dir is required for this mode");
  if (!fs::is_directory(c.data_dir))
    throw std::runtime_error("data_dir '" + c.data_dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(c.data_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error("data_dir '" + c.data_dir + "' has no .csv files");

  std::vector<DatasetTable> out;
  for (const std::string& path : paths) {
    DatasetTable d = load_csv(path, c.label_col, header_mode(c));
    if (c.n_classes == 2) {
      if (d.n_classes < 2) {
        std::fprintf(stderr, "[flattab] dataset '%s' skipped: single class\n", d.name.c_str());
        continue;
      }
      out.push_back(d.n_classes == 2 ? std::move(d) : binarize_one_vs_all(d));
    } else {
      if (d.n_classes < c.n_classes) {
        std::fprintf(stderr, "[flattab] dataset '%s' skipped: %d classes, need %d\n",
                     d.name.c_str(), d.n_classes, c.n_classes);
        continue;
      }
      out.push_back(reduce_to_k_classes(d, c.n_classes));
    }
  }
  if (out.empty()) throw std::runtime_error("no usable datasets in '" + c.data_dir + "'");
  return out;
}

RunConfig parse_config(const std::string& config_path, const std::string& overrides_json) {
  RunConfig c;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("config file '" + config_path + "' not found");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::exception& e) {
        throw std::invalid_argument("config: '" + config_path + "' is not valid JSON: " +
                                    e.what());
      }
      if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
      apply_json(c, j);
    }
  }
  if (!overrides_json.empty()) apply_json(c, json::parse(overrides_json));
  return c;
}

int run(const RunConfig& c) {
  if (c.mode == "train") return run_train(c);
  if (c.mode == "eval") return run_eval(c, false);
  if (c.mode == "adapt-eval") return run_eval(c, true);
  if (c.mode == "export-embeddings") return run_export(c, false);
  if (c.mode == "export-attention") return run_export(c, true);
  if (c.mode == "time") return run_time(c);
  if (c.mode == "synth") return run_synth(c);
  throw std::invalid_argument("unknown mode '" + c.mode + "'");
}

}  // namespace flattab
