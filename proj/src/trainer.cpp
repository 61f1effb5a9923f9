#include "flattab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "flattab/encoder.hpp"
#include "flattab/hypernet.hpp"

namespace flattab {

void TrainConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(lr > 0.0) || !(eps > 0.0))
    throw std::invalid_argument("TrainConfig: lr and eps must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (n_meta < 1 || n_target < 1)
    throw std::invalid_argument("TrainConfig: n_meta and n_target must be positive");
  if (!(theta_value > 0.0))
    throw std::invalid_argument("TrainConfig: theta_value must be positive");
}

void AdaptConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("AdaptConfig: steps must be >= 0");
  if (!(lr_columns > 0.0) || !(lr_dataset > 0.0))
    throw std::invalid_argument("AdaptConfig: learning rates must be positive");
}

Var cross_entropy(Tape& tape, Var probs, const std::vector<int>& labels) {
  Var picked = tape.pick_class(probs, labels);
  Var logp = tape.log(tape.clamp_min(picked, 1e-12));
  return tape.neg(tape.mean_all(logp));
}

TaskForward task_forward(Tape& tape, const BoundModel& m, const Task& task,
                         const ModelConfig& cfg, AttentionCapture* capture) {
  if (task.n_classes != cfg.n_classes)
    throw std::invalid_argument("task_forward: task has " + std::to_string(task.n_classes) +
                                " classes, model expects " + std::to_string(cfg.n_classes));
  if (!task.target_y.has_value())
    throw std::invalid_argument("task_forward: task has no target labels");
  TaskForward out;
  Var pooled = pool_rows(tape, m, task.meta_x, task.meta_y, cfg);
  out.e = encode_dataset(tape, m, pooled);
  out.p = encode_columns(tape, m, pooled);
  GeneratedWeights gw = generate_weights(tape, m, out.e, cfg);
  out.probs = predict_probs(tape, task.target_x, out.p, gw, cfg, capture);
  out.loss = cross_entropy(tape, out.probs, *task.target_y);
  return out;
}

double train_step(const std::vector<Task>& batch, ModelParams& params, AdamW& opt) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Tape tape(true);
  BoundModel m = bind_model(tape, params);
  Var total{};
  for (const Task& task : batch) {
    Var loss = task_forward(tape, m, task, params.cfg).loss;
    total = total.valid() ? tape.add(total, loss) : loss;
  }
  Var mean_loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
  const double loss_value = tape.val_scalar(mean_loss);
  if (!std::isfinite(loss_value)) {
    std::fprintf(stderr, "[flattab] train_step: non-finite loss %g, step skipped\n", loss_value);
    return loss_value;
  }
  tape.backward(mean_loss);

  auto named = params.named_tensors();
  std::vector<Tensor*> ps;
  std::vector<const Tensor*> gs;
  ps.reserve(named.size());
  gs.reserve(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    ps.push_back(named[i].second);
    gs.push_back(&tape.grad(m.slots[i]));
  }
  opt.step(ps, gs);
  return loss_value;
}

namespace {

bool dataset_usable(const DatasetTable& d, const TrainConfig& cfg) {
  if (d.rows() < static_cast<std::size_t>(cfg.n_meta + cfg.n_target)) return false;
  if (d.n_classes == 2) {
    const auto counts = d.class_counts();
    if (counts[0] == 0 || counts[1] == 0) return false;
  }
  return true;
}

}  // namespace

Checkpoint train_loop(const std::vector<DatasetTable>& train_datasets, const TrainConfig& cfg,
                      const ModelConfig& mcfg, std::ostream* log,
                      const Checkpoint* resume_from, const ModelParams* theta_from) {
  cfg.validate();
  mcfg.validate();
  if (train_datasets.empty()) throw std::invalid_argument("train_loop: no training datasets");

  std::vector<const DatasetTable*> usable;
  for (const DatasetTable& d : train_datasets)
    if (dataset_usable(d, cfg)) usable.push_back(&d);
  if (usable.empty())
    throw std::runtime_error("train_loop: every dataset is too small for n_meta=" +
                             std::to_string(cfg.n_meta) + ", n_target=" +
                             std::to_string(cfg.n_target));

  Checkpoint ckpt;
  if (resume_from != nullptr) {
    ckpt = *resume_from;
    ckpt.train_cfg = cfg;
  } else {
    Rng init_rng(derive_seed(cfg.seed, "init"));
    ckpt.params = ModelParams::init(mcfg, init_rng);
    if (theta_from != nullptr)
      set_theta_recorded(ckpt.params, *theta_from);
    else
      set_theta_fixed(ckpt.params, cfg.theta_value);
    ckpt.train_cfg = cfg;
    ckpt.opt = AdamW(AdamConfig{.lr = cfg.lr,
                                .beta1 = 0.9,
                                .beta2 = 0.999,
                                .eps = cfg.eps,
                                .weight_decay = cfg.weight_decay});
    ckpt.data_rng = Rng(derive_seed(cfg.seed, "data"));
    ckpt.step = 0;
  }
  ckpt.train_dataset_names.clear();
  for (const DatasetTable* d : usable) ckpt.train_dataset_names.push_back(d->name);

  const auto start_time = std::chrono::steady_clock::now();
  for (long long step = ckpt.step; step < cfg.steps; ++step) {
    std::vector<Task> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      bool sampled = false;
      for (int attempt = 0; attempt < 100 && !sampled; ++attempt) {
        const DatasetTable* d = usable[ckpt.data_rng.below(usable.size())];
        try {
          batch.push_back(sample_task(*d, cfg.n_meta, cfg.n_target, ckpt.data_rng,
                                      cfg.column_subsample));
          sampled = true;
        } catch (const std::exception&) {
          // Infeasible draw on this dataset; pick again.
        }
      }
      if (!sampled)
        throw std::runtime_error("train_loop: could not sample a task after 100 attempts");
    }
    const double loss = train_step(batch, ckpt.params, ckpt.opt);
    ckpt.step = step + 1;
    if (log != nullptr && (ckpt.step % cfg.log_every == 0 || ckpt.step == cfg.steps)) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      char line[160];
      std::snprintf(line, sizeof(line), "{\"step\":%lld,\"loss\":%.10g,\"wall_s\":%.3f}\n",
                    ckpt.step, loss, wall);
      (*log) << line;
      log->flush();
    }
  }
  return ckpt;
}

namespace {

std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> labels(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.cols(); ++k)
      if (probs.at(i, k) > probs.at(i, best)) best = k;  // ties keep the lower index
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

void check_inferable(const Task& task, const ModelParams& params) {
  if (task.n_cols() < 2)
    throw std::invalid_argument("infer: task from '" + task.source_name +
                                "' has a single column; at least 2 are required");
  if (task.n_meta() < 1) throw std::invalid_argument("infer: empty meta split");
  if (task.n_classes != params.cfg.n_classes)
    throw std::invalid_argument("infer: class count mismatch between task and model");
}

struct Embeddings {
  Tensor e, p;
};

Embeddings initial_embeddings(const Task& task, const ModelParams& params) {
  Tape tape(false);
  BoundModel m = bind_model(tape, params);
  Var pooled = pool_rows(tape, m, task.meta_x, task.meta_y, params.cfg);
  return {tape.val(encode_dataset(tape, m, pooled)),
          tape.val(encode_columns(tape, m, pooled))};
}

Prediction predict_with(const Task& task, const ModelParams& params, const Tensor& e,
                        const Tensor& p) {
  Tape tape(false);
  BoundModel m = bind_model(tape, params);
  GeneratedWeights gw = generate_weights(tape, m, tape.leaf(e), params.cfg);
  Var probs = predict_probs(tape, task.target_x, tape.leaf(p), gw, params.cfg, nullptr, true);
  Prediction out;
  out.probs = tape.val(probs);
  out.labels = argmax_rows(out.probs);
  out.e = e;
  out.p = p;
  return out;
}

}  // namespace

Prediction infer(const Task& task, const ModelParams& params) {
  return flatadapt_infer(task, params, AdaptConfig{.steps = 0});
}

Prediction flatadapt_infer(const Task& task, const ModelParams& params,
                           const AdaptConfig& adapt) {
  adapt.validate();
  check_inferable(task, params);
  Embeddings emb = initial_embeddings(task, params);

  if (adapt.steps > 0) {
    AdamW opt(AdamConfig{.lr = adapt.lr_dataset, .eps = 1e-8, .weight_decay = 0.0});
    const double lrs[2] = {adapt.lr_dataset, adapt.lr_columns};
    for (int s = 0; s < adapt.steps; ++s) {
      Tape tape(true);
      Var ev = tape.leaf(emb.e);
      Var pv = tape.leaf(emb.p);
      BoundModel m = bind_model(tape, params);
      GeneratedWeights gw = generate_weights(tape, m, ev, params.cfg);
      Var probs = predict_probs(tape, task.meta_x, pv, gw, params.cfg);
      Var loss = cross_entropy(tape, probs, task.meta_y);
      tape.backward(loss);
      Tensor ge = tape.grad(ev);
      Tensor gp = tape.grad(pv);
      Tensor* ps[2] = {&emb.e, &emb.p};
      const Tensor* gs[2] = {&ge, &gp};
      opt.step(ps, gs, lrs);
    }
  }
  return predict_with(task, params, emb.e, emb.p);
}

double task_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw std::invalid_argument("task_accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace flattab
