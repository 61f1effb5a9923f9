#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flattab/autograd.hpp"
#include "flattab/rng.hpp"
#include "flattab/tensor.hpp"

namespace flattab {

// Architecture hyperparameters. Defaults are the production configuration;
// tests shrink everything for exhaustive gradient checks.
struct ModelConfig {
  int n_classes = 2;
  int d_e = 64;        // dataset embedding width
  int d_c = 15;        // column embedding width
  int enc_hidden = 64; // encoder MLP width
  int gat_layers = 2;
  int gat_heads = 2;
  int gat_hidden = 128;  // concatenated across heads
  int gat_out = 16;      // concatenated across heads

  int label_dim() const { return n_classes == 2 ? 1 : n_classes; }
  int f1_in() const { return 1 + label_dim(); }
  int node_dim() const { return d_c + 1; }
  int head_dim(int layer) const {
    return (layer == gat_layers - 1 ? gat_out : gat_hidden) / gat_heads;
  }
  int layer_in(int layer) const { return layer == 0 ? node_dim() : gat_hidden; }
  // Flattened size of one GAT layer's generated block: per head [a, b, W].
  int generated_size(int layer) const {
    const int o = head_dim(layer);
    return gat_heads * (2 * o + o + o * layer_in(layer));
  }
  int classifier_size() const { return n_classes * gat_out; }

  void validate() const;
};

// One dense layer; weights stored [in, out] so the forward pass is a plain
// row-major product. b is empty for bias-free layers.
struct Linear {
  Tensor w;
  Tensor b;
  bool has_bias() const { return !b.empty(); }
};

struct EncoderParams {
  std::vector<Linear> f1;  // residual MLP, 4 blocks
  std::vector<Linear> f2;  // 2-layer MLP
  std::vector<Linear> f3;  // residual MLP, 4 blocks
  std::vector<Linear> g;   // 2-layer MLP, d_c output
};

struct DecoderParams {
  std::vector<Linear> h;  // one bias-free generator per target-network layer
  // log(theta) for {attention, bias, transform, classifier}; stored as logs
  // so positivity is structural.
  Tensor log_theta;
};

struct ModelParams {
  ModelConfig cfg;
  EncoderParams enc;
  DecoderParams dec;

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  // Stable (name, tensor) listing used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  // FNV-1a over the raw bytes of every tensor, in listing order.
  uint64_t content_hash() const;
};

// Sets every theta to `value` (> 0 required).
void set_theta_fixed(ModelParams& params, double value);
// Adopts the theta values recorded in a previously trained model.
void set_theta_recorded(ModelParams& params, const ModelParams& trained);

// Parameters bound onto a tape for one forward pass.
struct BoundLinear {
  Var w;
  Var b;  // invalid when the layer has no bias
};

struct BoundModel {
  std::vector<BoundLinear> f1, f2, f3, g;
  std::vector<Var> dec_h;
  Var log_theta;
  // Tape leaves aligned with named_tensors() order, for gradient readout.
  std::vector<Var> slots;
};

BoundModel bind_model(Tape& tape, const ModelParams& params);

// Assembles a BoundModel from existing leaves ordered like named_tensors().
// Lets callers (gradient checks, adaptation loops) own the leaf creation.
BoundModel bind_model_from(const ModelParams& shape_ref, const std::vector<Var>& slots);

// Shared MLP forwards. x is [m, in].
Var mlp2_forward(Tape& tape, const std::vector<BoundLinear>& layers, Var x);
Var residual_mlp_forward(Tape& tape, const std::vector<BoundLinear>& blocks, Var x);

}  // namespace flattab
