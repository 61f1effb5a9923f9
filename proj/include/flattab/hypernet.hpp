#pragma once

#include <vector>

#include "flattab/model.hpp"

namespace flattab {

// Target-network parameters generated from a dataset embedding. Every block
// is L2-normalized per (layer, head, parameter kind) and rescaled by its
// learnable norm, so ||a|| = theta_a, ||b|| = theta_b, ||W||_F = theta_w and
// ||W_cls||_F = theta_cls by construction.
struct GeneratedWeights {
  // [layer][head]
  std::vector<std::vector<Var>> attn;       // a, length 2*head_dim
  std::vector<std::vector<Var>> bias;       // b, length head_dim
  std::vector<std::vector<Var>> transform;  // W, [head_dim, layer_in]
  Var classifier;                           // [n_classes, gat_out]
};

// Applies the generators h_l to e and normalizes each block. Throws if any
// raw block's norm falls below 1e-12 (degenerate direction).
GeneratedWeights generate_weights(Tape& tape, const BoundModel& m, Var e,
                                  const ModelConfig& cfg);

}  // namespace flattab
