#include "flattab/exports.hpp"

#include <ostream>

#include "flattab/encoder.hpp"
#include "flattab/gatnet.hpp"
#include "flattab/hypernet.hpp"

namespace flattab {

void export_embeddings_csv(std::ostream& out, const ModelParams& params,
                           const std::vector<DatasetTable>& datasets, int tasks_per_dataset,
                           int n_meta, int n_target, uint64_t seed) {
  out << "source_name,task_id";
  for (int i = 0; i < params.cfg.d_e; ++i) out << ",e_" << i;
  out << '\n';
  out.precision(10);
  for (const DatasetTable& d : datasets) {
    const auto tasks = fixed_eval_tasks(d, n_meta, n_target, tasks_per_dataset, seed);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      Tape tape(false);
      BoundModel m = bind_model(tape, params);
      Var pooled = pool_rows(tape, m, tasks[t].meta_x, tasks[t].meta_y, params.cfg);
      const Tensor& e = tape.val(encode_dataset(tape, m, pooled));
      out << d.name << ',' << t;
      for (std::size_t i = 0; i < e.size(); ++i) out << ',' << e[i];
      out << '\n';
    }
  }
}

void export_attention_csv(std::ostream& out, const ModelParams& params,
                          const std::vector<DatasetTable>& datasets, int tasks_per_dataset,
                          int n_meta, int n_target, uint64_t seed) {
  out << "task_id,node_j,node_k,alpha\n";
  out.precision(10);
  for (const DatasetTable& d : datasets) {
    const auto tasks = fixed_eval_tasks(d, n_meta, n_target, tasks_per_dataset, seed);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const Task& task = tasks[t];
      Tape tape(false);
      BoundModel m = bind_model(tape, params);
      Var pooled = pool_rows(tape, m, task.meta_x, task.meta_y, params.cfg);
      Var e = encode_dataset(tape, m, pooled);
      Var p = encode_columns(tape, m, pooled);
      GeneratedWeights gw = generate_weights(tape, m, e, params.cfg);
      AttentionCapture capture;
      predict_probs(tape, task.meta_x, p, gw, params.cfg, &capture);

      const std::size_t c = task.n_cols();
      Tensor avg({c, c});
      for (const Tensor& alpha : capture.alpha)
        for (std::size_t i = 0; i < c * c; ++i) avg[i] += alpha[i];
      const double inv = 1.0 / static_cast<double>(capture.alpha.size());
      for (std::size_t i = 0; i < c * c; ++i) avg[i] *= inv;

      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t k = 0; k < c; ++k)
          out << d.name << '/' << t << ',' << j << ',' << k << ',' << avg.at(j, k) << '\n';
    }
  }
}

}  // namespace flattab
