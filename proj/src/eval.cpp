#include "flattab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "flattab/baselines.hpp"
#include "flattab/synth.hpp"

namespace flattab {

namespace {

struct Accumulator {
  std::map<std::string, std::map<std::string, std::vector<double>>> accs;  // model -> dataset -> per-task

  void add(const std::string& model, const std::string& dataset, double acc) {
    accs[model][dataset].push_back(acc);
  }
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  const double sd = std::sqrt(sq / static_cast<double>(v.size() - 1));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "model,dataset,n_meta,accuracy,stderr,n_tasks\n";
  out.precision(10);
  for (const EvalRow& r : rows)
    out << r.model << ',' << r.dataset << ',' << r.n_meta << ',' << r.accuracy << ','
        << r.std_error << ',' << r.n_tasks << '\n';
  return out.str();
}

std::string EvalReport::summary_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const ModelSummary& s : summary)
    j[s.model] = {{"mean_accuracy", s.mean_accuracy},
                  {"median_rank", s.median_rank},
                  {"n_datasets", s.n_datasets}};
  return j.dump(2);
}

EvalReport run_fold_eval(const std::vector<DatasetTable>& datasets, const FoldPlan& plan,
                         const std::map<int, std::vector<const Checkpoint*>>& fold_models,
                         const EvalOptions& opts,
                         const std::vector<const TaskModel*>& extra_models) {
  // Deterministic dataset order.
  std::vector<const DatasetTable*> ordered;
  for (const DatasetTable& d : datasets) ordered.push_back(&d);
  std::sort(ordered.begin(), ordered.end(),
            [](const DatasetTable* a, const DatasetTable* b) { return a->name < b->name; });

  Accumulator acc;
  for (const DatasetTable* d : ordered) {
    const auto fold_it = plan.fold_of.find(d->name);
    if (fold_it == plan.fold_of.end())
      throw std::invalid_argument("run_fold_eval: dataset '" + d->name + "' is not in the fold plan");
    const int fold = fold_it->second;

    std::vector<const Checkpoint*> models;
    if (const auto it = fold_models.find(fold); it != fold_models.end()) models = it->second;
    for (const Checkpoint* c : models) {
      const auto& names = c->train_dataset_names;
      if (std::find(names.begin(), names.end(), d->name) != names.end())
        throw std::runtime_error("run_fold_eval: checkpoint for fold " + std::to_string(fold) +
                                 " was trained on its own test dataset '" + d->name + "'");
    }

    const std::vector<Task> tasks =
        fixed_eval_tasks(*d, opts.n_meta, opts.n_target, opts.tasks_per_dataset, opts.seed);
    if (tasks.empty()) continue;

    for (const Task& task : tasks) {
      const std::vector<int>& truth = *task.target_y;
      if (!models.empty()) {
        double flat_acc = 0.0, adapt_acc = 0.0;
        for (const Checkpoint* c : models) {
          flat_acc += task_accuracy(infer(task, c->params).labels, truth);
          if (opts.with_flatadapt)
            adapt_acc += task_accuracy(flatadapt_infer(task, c->params, opts.adapt).labels, truth);
        }
        acc.add("flat", d->name, flat_acc / static_cast<double>(models.size()));
        if (opts.with_flatadapt)
          acc.add("flatadapt", d->name, adapt_acc / static_cast<double>(models.size()));
      }
      if (opts.with_baselines) {
        bool single_class = true;
        for (std::size_t i = 1; i < task.meta_y.size() && single_class; ++i)
          single_class = task.meta_y[i] == task.meta_y[0];
        if (!single_class) {
          acc.add("lr", d->name, task_accuracy(baseline_lr(task, opts.lr_l2), truth));
          const int k = std::min<int>(opts.knn_k, static_cast<int>(task.n_meta()));
          acc.add("knn", d->name, task_accuracy(baseline_knn(task, k), truth));
        }
      }
      for (const TaskModel* m : extra_models) {
        if (auto pred = m->predict(task)) acc.add(m->name(), d->name, task_accuracy(*pred, truth));
      }
    }
  }

  EvalReport report;
  for (const auto& [model, per_dataset] : acc.accs)
    for (const auto& [dataset, v] : per_dataset)
      report.rows.push_back(EvalRow{model, dataset, opts.n_meta, mean_of(v), stderr_of(v),
                                    static_cast<int>(v.size())});

  // Ranks per dataset (1 = best, ties share the average position), median
  // across datasets.
  std::map<std::string, std::vector<double>> ranks;
  std::map<std::string, std::vector<double>> dataset_accs;
  for (const EvalRow& r : report.rows) dataset_accs[r.dataset].push_back(0.0);  // sizing only
  for (const auto& [dataset, unused] : dataset_accs) {
    std::vector<std::pair<double, std::string>> entries;
    for (const EvalRow& r : report.rows)
      if (r.dataset == dataset) entries.emplace_back(r.accuracy, r.model);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::size_t i = 0;
    while (i < entries.size()) {
      std::size_t j = i;
      while (j + 1 < entries.size() && entries[j + 1].first == entries[i].first) ++j;
      const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) ranks[entries[t].second].push_back(shared);
      i = j + 1;
    }
  }
  for (const auto& [model, per_dataset] : acc.accs) {
    ModelSummary s;
    s.model = model;
    std::vector<double> ds_means;
    for (const auto& [dataset, v] : per_dataset) ds_means.push_back(mean_of(v));
    s.mean_accuracy = ds_means.empty() ? 0.0 : mean_of(ds_means);
    s.median_rank = ranks.count(model) ? median_of(ranks[model]) : 0.0;
    s.n_datasets = static_cast<int>(per_dataset.size());
    report.summary.push_back(s);
  }
  return report;
}

std::vector<Task> make_timing_tasks(int n_tasks, int n_meta, int n_target, int n_cols,
                                    uint64_t seed) {
  DatasetTable d = synth_dataset(RuleFamily::linear_pair, 4 * (n_meta + n_target) + 8, n_cols,
                                 derive_seed(seed, "timing"), "timing");
  Rng rng(derive_seed(seed, "timing_tasks"));
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(n_tasks));
  for (int i = 0; i < n_tasks; ++i) tasks.push_back(sample_task(d, n_meta, n_target, rng, false));
  return tasks;
}

double time_inference(const std::function<void(const Task&)>& fn,
                      const std::vector<Task>& tasks) {
  const auto start = std::chrono::steady_clock::now();
  for (const Task& t : tasks) fn(t);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "model,n_cols,seconds\n";
  out.precision(6);
  for (const TimingRow& r : rows) out << r.model << ',' << r.n_cols << ',' << r.seconds << '\n';
  return out.str();
}

}  // namespace flattab
