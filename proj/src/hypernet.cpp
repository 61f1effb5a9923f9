#include "flattab/hypernet.hpp"

#include <stdexcept>

namespace flattab {

namespace {

constexpr double kDegenerateNorm = 1e-12;

enum ThetaIndex { kThetaAttn = 0, kThetaBias = 1, kThetaTransform = 2, kThetaClassifier = 3 };

// block / ||block|| * theta, guarding the degenerate direction.
Var normalize_block(Tape& tape, Var block, Var theta, const char* what) {
  Var norm = tape.l2norm(block);
  if (tape.val_scalar(norm) < kDegenerateNorm)
    throw std::runtime_error(std::string("generate_weights: degenerate ") + what +
                             " block (norm below 1e-12)");
  return tape.mul_by(tape.div_by(block, norm), theta);
}

}  // namespace

GeneratedWeights generate_weights(Tape& tape, const BoundModel& m, Var e,
                                  const ModelConfig& cfg) {
  const Tensor& ev = tape.val(e);
  if (ev.rank() != 1 || ev.size() != static_cast<std::size_t>(cfg.d_e))
    throw std::invalid_argument("generate_weights: embedding shape " + ev.shape_str() +
                                " does not match d_e=" + std::to_string(cfg.d_e));
  if (!ev.all_finite())
    throw std::invalid_argument("generate_weights: non-finite dataset embedding");

  Var theta_a = tape.exp(tape.slice(m.log_theta, kThetaAttn, 1));
  Var theta_b = tape.exp(tape.slice(m.log_theta, kThetaBias, 1));
  Var theta_w = tape.exp(tape.slice(m.log_theta, kThetaTransform, 1));
  Var theta_cls = tape.exp(tape.slice(m.log_theta, kThetaClassifier, 1));

  Var e_row = tape.reshape(e, {1, static_cast<std::size_t>(cfg.d_e)});
  GeneratedWeights out;
  out.attn.resize(static_cast<std::size_t>(cfg.gat_layers));
  out.bias.resize(static_cast<std::size_t>(cfg.gat_layers));
  out.transform.resize(static_cast<std::size_t>(cfg.gat_layers));

  for (int l = 0; l < cfg.gat_layers; ++l) {
    Var raw = tape.reshape(tape.matmul(e_row, m.dec_h[static_cast<std::size_t>(l)]),
                           {static_cast<std::size_t>(cfg.generated_size(l))});
    const std::size_t o = static_cast<std::size_t>(cfg.head_dim(l));
    const std::size_t in = static_cast<std::size_t>(cfg.layer_in(l));
    std::size_t off = 0;
    for (int h = 0; h < cfg.gat_heads; ++h) {
      Var a_raw = tape.slice(raw, off, 2 * o);
      off += 2 * o;
      Var b_raw = tape.slice(raw, off, o);
      off += o;
      Var w_raw = tape.slice(raw, off, o * in);
      off += o * in;
      out.attn[static_cast<std::size_t>(l)].push_back(
          normalize_block(tape, a_raw, theta_a, "attention"));
      out.bias[static_cast<std::size_t>(l)].push_back(
          normalize_block(tape, b_raw, theta_b, "bias"));
      Var w = normalize_block(tape, w_raw, theta_w, "transform");
      out.transform[static_cast<std::size_t>(l)].push_back(tape.reshape(w, {o, in}));
    }
  }

  // Final layer: only the classifier matrix is generated.
  Var cls_raw = tape.reshape(tape.matmul(e_row, m.dec_h[static_cast<std::size_t>(cfg.gat_layers)]),
                             {static_cast<std::size_t>(cfg.classifier_size())});
  Var cls = normalize_block(tape, cls_raw, theta_cls, "classifier");
  out.classifier = tape.reshape(
      cls, {static_cast<std::size_t>(cfg.n_classes), static_cast<std::size_t>(cfg.gat_out)});
  return out;
}

}  // namespace flattab
