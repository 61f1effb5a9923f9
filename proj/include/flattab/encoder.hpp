#pragma once

#include <vector>

#include "flattab/model.hpp"

namespace flattab {

// Feature-label input rows for f1: one row per (meta row, column) pair,
// grouped by column, each row [x_ij, enc(y_i)]. Binary labels enter as a
// single 0/1 scalar, K-class labels one-hot.
Tensor build_f1_input(const Tensor& meta_x, const std::vector<int>& meta_y, int n_classes);

// Per-column pooled representation: row j is the mean over meta rows of
// f1(x_ij, y_i). Shape [n_cols, enc_hidden].
Var pool_rows(Tape& tape, const BoundModel& m, const Tensor& meta_x,
              const std::vector<int>& meta_y, const ModelConfig& cfg);

// Dataset embedding e = f3(mean_j f2(pooled_j)), shape [d_e].
Var encode_dataset(Tape& tape, const BoundModel& m, Var pooled);

// Column embeddings p_j = g(pooled_j), shape [n_cols, d_c].
Var encode_columns(Tape& tape, const BoundModel& m, Var pooled);

}  // namespace flattab
