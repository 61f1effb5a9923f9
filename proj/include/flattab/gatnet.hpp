#pragma once

#include <vector>

#include "flattab/hypernet.hpp"
#include "flattab/model.hpp"

namespace flattab {

// Alpha matrices captured from the first GAT layer, one [n_cols, n_cols]
// tensor per (row, head) in evaluation order.
struct AttentionCapture {
  std::vector<Tensor> alpha;
};

// Initial node states for one data row: node j is [p_j ++ x_j].
Var build_nodes(Tape& tape, Var p, const Tensor& x_row);

// Attention coefficients for one head over the complete graph including
// self-loops: alpha[j,k] = softmax_k(LReLU(a^T [W h_j ++ W h_k])). Every row
// of the result sums to 1.
Var attention_coeffs(Tape& tape, Var nodes, Var a, Var w);

// One multi-head GAT layer: per head, alpha-weighted aggregation of W h_k
// plus bias, heads concatenated. No nonlinearity after aggregation.
Var gat_layer(Tape& tape, Var nodes, const std::vector<Var>& a, const std::vector<Var>& b,
              const std::vector<Var>& w, AttentionCapture* capture = nullptr);

// Row-independent predictions: for each target row, build nodes, run the GAT
// stack, mean-pool, apply the generated classifier and softmax. Returns
// [n_rows, n_classes] probabilities. With rollback_rows (grad-free tapes
// only) intermediate nodes are dropped after each row to bound memory.
Var predict_probs(Tape& tape, const Tensor& target_x, Var p, const GeneratedWeights& gw,
                  const ModelConfig& cfg, AttentionCapture* capture = nullptr,
                  bool rollback_rows = false);

}  // namespace flattab
