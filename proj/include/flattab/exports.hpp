#pragma once

#include <iosfwd>

#include "flattab/model.hpp"
#include "flattab/sampling.hpp"

namespace flattab {

// Dataset embeddings for external projection plots: one row per sampled
// task, columns (source_name, task_id, e_0..e_{d_e-1}).
void export_embeddings_csv(std::ostream& out, const ModelParams& params,
                           const std::vector<DatasetTable>& datasets, int tasks_per_dataset,
                           int n_meta, int n_target, uint64_t seed);

// First-layer attention maps computed on each task's meta rows, averaged
// over heads and rows, emitted as (task_id, node_j, node_k, alpha).
void export_attention_csv(std::ostream& out, const ModelParams& params,
                          const std::vector<DatasetTable>& datasets, int tasks_per_dataset,
                          int n_meta, int n_target, uint64_t seed);

}  // namespace flattab
