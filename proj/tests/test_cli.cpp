#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flattab/runner.hpp"
#include "flattab/synth.hpp"

using namespace flattab;
namespace fs = std::filesystem;

namespace {

std::string flattab_bin() {
  const char* env = std::getenv("FLATTAB_BIN");
  return env != nullptr ? env : "./flattab";
}

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = flattab_bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[4096];
  while (fgets(buf, sizeof(buf), pipe) != nullptr) output += buf;
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

std::string write_config(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/flattab_cli_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("defaults follow the documented training configuration") {
  RunConfig c = parse_config(write_config("empty.json", ""), "");
  CHECK(c.train.steps == 62000);
  CHECK(c.train.batch_size == 3);
  CHECK(c.train.lr == 5e-4);
  CHECK(c.train.eps == 3e-4);
  CHECK(c.train.weight_decay == 1e-4);
  CHECK(c.train.column_subsample);
  CHECK(c.adapt.steps == 5);
  CHECK(c.adapt.lr_columns == 1e-3);
  CHECK(c.adapt.lr_dataset == 7.5e-2);
  CHECK(c.tasks_per_dataset == 200);
  CHECK(c.train.theta_value == 1.0);
}

TEST_CASE("flag overrides beat config file values") {
  const std::string path = write_config("override.json", R"({"n_meta": 10, "lr": 0.01})");
  RunConfig c = parse_config(path, R"({"n_meta": 5})");
  CHECK(c.n_meta == 5);
  CHECK(c.train.lr == 0.01);
}

TEST_CASE("unknown keys are rejected with the valid key list") {
  const std::string path = write_config("unknown.json", R"({"learning_rate": 0.1})");
  try {
    parse_config(path, "");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("learning_rate") != std::string::npos);
    CHECK(msg.find("valid keys") != std::string::npos);
    CHECK(msg.find("weight_decay") != std::string::npos);
  }
}

TEST_CASE("type mismatches are rejected with the key name") {
  const std::string path = write_config("badtype.json", R"({"steps": "many"})");
  CHECK_THROWS_WITH_AS(parse_config(path, ""), doctest::Contains("steps"),
                       std::invalid_argument);
}

TEST_CASE("label_col accepts an index or the word last") {
  CHECK(parse_config(write_config("lc1.json", R"({"label_col": 0})"), "").label_col == 0);
  CHECK(parse_config(write_config("lc2.json", R"({"label_col": "last"})"), "").label_col == -1);
  CHECK_THROWS_AS(parse_config(write_config("lc3.json", R"({"label_col": "first"})"), ""),
                  std::invalid_argument);
}

TEST_CASE("full pipeline: synth, train, eval, adapt-eval, exports, reload") {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string root = "/tmp/flattab_pipeline";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = root + "/data", out = root + "/out";

  CHECK(run_cli("synth --out " + data + " --synth-datasets 6 --synth-rows 128 --synth-cols 4"
                " --seed 5").exit_code == 0);

  // Same seed reproduces identical files.
  const std::string data2 = root + "/data2";
  CHECK(run_cli("synth --out " + data2 + " --synth-datasets 6 --synth-rows 128 --synth-cols 4"
                " --seed 5").exit_code == 0);
  for (const auto& entry : fs::directory_iterator(data))
    CHECK(slurp(entry.path().string()) ==
          slurp(data2 + "/" + entry.path().filename().string()));

  // Eval before training names the missing checkpoint.
  RunResult missing = run_cli("eval --data-dir " + data + " --out " + out +
                              " --folds 2 --seeds 0");
  CHECK(missing.exit_code != 0);
  CHECK(missing.output.find("model_fold0_seed0.ckpt") != std::string::npos);

  CHECK(run_cli("train --data-dir " + data + " --out " + out +
                " --folds 2 --seeds 0 --steps 500 --n-meta-train 6 --n-target-train 6"
                " --log-every 250").exit_code == 0);
  CHECK(fs::exists(out + "/model_fold0_seed0.ckpt"));
  CHECK(fs::exists(out + "/model_fold1_seed0.ckpt"));

  // The checkpoint reloads and carries the training dataset split.
  Checkpoint ckpt = load_checkpoint(out + "/model_fold0_seed0.ckpt");
  CHECK(ckpt.step == 500);
  CHECK(ckpt.train_dataset_names.size() == 3);

  const std::string eval_args = " --data-dir " + data + " --out " + out +
                                " --folds 2 --seeds 0 --n-meta 5 --n-target 5"
                                " --tasks-per-dataset 20";
  CHECK(run_cli("eval" + eval_args).exit_code == 0);
  const std::string plain_report = slurp(out + "/report.csv");
  CHECK(plain_report.find("flat,") != std::string::npos);
  CHECK(plain_report.find("knn,") != std::string::npos);
  CHECK(plain_report.find("lr,") != std::string::npos);

  // adapt-eval with zero adaptation steps reproduces the plain flat rows.
  CHECK(run_cli("adapt-eval" + eval_args + " --adapt-steps 0").exit_code == 0);
  const std::string adapt_report = slurp(out + "/report.csv");
  std::istringstream plain_lines(plain_report), adapt_lines(adapt_report);
  std::map<std::string, std::string> plain_flat, adapt_flat, adapt_adapt;
  std::string line;
  while (std::getline(plain_lines, line))
    if (line.rfind("flat,", 0) == 0) plain_flat[line.substr(0, line.find(',', 5))] = line;
  while (std::getline(adapt_lines, line)) {
    if (line.rfind("flat,", 0) == 0) adapt_flat[line.substr(0, line.find(',', 5))] = line;
    if (line.rfind("flatadapt,", 0) == 0) {
      std::string rest = line.substr(10);
      adapt_adapt[rest.substr(0, rest.find(','))] = rest;
    }
  }
  CHECK(plain_flat == adapt_flat);
  // Zero-step adaptation matches plain inference dataset by dataset.
  for (const auto& [dataset, rest] : adapt_adapt) {
    const std::string flat_line = adapt_flat.at("flat," + dataset);
    CHECK(flat_line.substr(5) == rest);
  }

  CHECK(run_cli("export-embeddings --data-dir " + data + " --out " + out + " --checkpoint " +
                out + "/model_fold0_seed0.ckpt --embed-tasks 3 --n-meta 5 --n-target 5")
            .exit_code == 0);
  CHECK(run_cli("export-attention --data-dir " + data + " --out " + out + " --checkpoint " +
                out + "/model_fold0_seed0.ckpt --embed-tasks 2 --n-meta 5 --n-target 5")
            .exit_code == 0);
  const std::string emb = slurp(out + "/embeddings.csv");
  CHECK(emb.find("source_name,task_id,e_0") == 0);
  const std::string att = slurp(out + "/attention.csv");
  CHECK(att.find("task_id,node_j,node_k,alpha") == 0);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(wall < 120.0);
}

TEST_CASE("synthetic labels re-evaluate exactly under their generating rule") {
  for (RuleFamily family :
       {RuleFamily::linear_pair, RuleFamily::sign_col, RuleFamily::xor_pair}) {
    RuleSpec rule;
    DatasetTable d = synth_dataset(family, 96, 5, 77, "check", &rule);
    for (std::size_t i = 0; i < d.rows(); ++i)
      CHECK(d.labels[i] == rule.label_of(d.features, i));
  }
}

TEST_CASE("perturbed grid reproduces the 4x4 boundary probe shape") {
  Task grid = perturbed_grid_task(3);
  CHECK(grid.n_meta() == 16);
  CHECK(grid.n_cols() == 2);
  int pos = 0;
  for (int y : grid.meta_y) pos += y;
  CHECK(pos >= 4);
  CHECK(pos <= 12);
}
