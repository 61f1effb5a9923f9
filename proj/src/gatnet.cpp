#include "flattab/gatnet.hpp"

#include <stdexcept>

namespace flattab {

namespace {

constexpr double kAttentionSlope = 0.2;

struct HeadAttention {
  Var alpha;  // [C, C]
  Var wh;     // [C, head_dim]
};

// Shared core of Eq. 5: logits[j,k] = a1.Wh_j + a2.Wh_k, leaky-relu'd and
// softmax-normalized over k.
HeadAttention head_attention(Tape& tape, Var nodes, Var a, Var w) {
  const Tensor& av = tape.val(a);
  if (av.rank() != 1 || av.size() % 2 != 0)
    throw std::invalid_argument("attention_coeffs: attention vector shape " + av.shape_str());
  const std::size_t o = av.size() / 2;
  const Tensor& wv = tape.val(w);
  if (wv.rank() != 2 || wv.rows() != o || wv.cols() != tape.val(nodes).cols())
    throw std::invalid_argument("attention_coeffs: transform shape " + wv.shape_str() +
                                " incompatible with nodes " + tape.val(nodes).shape_str());

  Var wh = tape.matmul(nodes, tape.transpose(w));  // [C, o]
  Var a_self = tape.slice(a, 0, o);
  Var a_peer = tape.slice(a, o, o);
  Var u = tape.matvec(wh, a_self);
  Var v = tape.matvec(wh, a_peer);
  Var logits = tape.leaky_relu(tape.outer_add(u, v), kAttentionSlope);
  return {tape.softmax(logits, 1), wh};
}

}  // namespace

Var build_nodes(Tape& tape, Var p, const Tensor& x_row) {
  const Tensor& pv = tape.val(p);
  if (pv.rank() != 2 || x_row.rank() != 1 || pv.rows() != x_row.size())
    throw std::invalid_argument("build_nodes: column embeddings " + pv.shape_str() +
                                " do not match feature vector " + x_row.shape_str());
  Tensor col({x_row.size(), 1});
  for (std::size_t j = 0; j < x_row.size(); ++j) col[j] = x_row[j];
  Var x = tape.leaf(std::move(col));
  const Var parts[] = {p, x};
  return tape.hstack(parts);
}

Var attention_coeffs(Tape& tape, Var nodes, Var a, Var w) {
  return head_attention(tape, nodes, a, w).alpha;
}

Var gat_layer(Tape& tape, Var nodes, const std::vector<Var>& a, const std::vector<Var>& b,
              const std::vector<Var>& w, AttentionCapture* capture) {
  if (a.size() != b.size() || a.size() != w.size() || a.empty())
    throw std::invalid_argument("gat_layer: inconsistent head parameter lists");
  std::vector<Var> heads;
  heads.reserve(a.size());
  for (std::size_t h = 0; h < a.size(); ++h) {
    HeadAttention att = head_attention(tape, nodes, a[h], w[h]);
    if (capture != nullptr) capture->alpha.push_back(tape.val(att.alpha));
    Var agg = tape.matmul(att.alpha, att.wh);
    heads.push_back(tape.add_bias(agg, b[h]));
  }
  return tape.hstack(heads);
}

Var predict_probs(Tape& tape, const Tensor& target_x, Var p, const GeneratedWeights& gw,
                  const ModelConfig& cfg, AttentionCapture* capture, bool rollback_rows) {
  if (target_x.rank() != 2)
    throw std::invalid_argument("predict_probs: target features must be a matrix, got " +
                                target_x.shape_str());
  const Tensor& pv = tape.val(p);
  if (pv.rank() != 2 || pv.rows() != target_x.cols() ||
      pv.cols() != static_cast<std::size_t>(cfg.d_c))
    throw std::invalid_argument("predict_probs: column embeddings " + pv.shape_str() +
                                " do not match target features " + target_x.shape_str());
  if (gw.transform.size() != static_cast<std::size_t>(cfg.gat_layers))
    throw std::invalid_argument("predict_probs: generated weights do not match the layer count");
  if (rollback_rows && tape.grad_enabled())
    throw std::logic_error("predict_probs: row rollback requires a grad-free tape");

  const std::size_t n_rows = target_x.rows(), n_cols = target_x.cols();
  std::vector<Var> row_probs;
  std::vector<Tensor> row_prob_values;
  Tensor x_row({n_cols});
  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::size_t mark = tape.size();
    for (std::size_t j = 0; j < n_cols; ++j) x_row[j] = target_x.at(i, j);
    Var nodes = build_nodes(tape, p, x_row);
    for (int l = 0; l < cfg.gat_layers; ++l)
      nodes = gat_layer(tape, nodes, gw.attn[static_cast<std::size_t>(l)],
                        gw.bias[static_cast<std::size_t>(l)],
                        gw.transform[static_cast<std::size_t>(l)],
                        l == 0 ? capture : nullptr);
    Var pooled = tape.mean(nodes, 0);
    Var logits = tape.matvec(gw.classifier, pooled);
    Var prob = tape.softmax(logits, 0);
    if (rollback_rows) {
      row_prob_values.push_back(tape.val(prob));
      tape.truncate(mark);
    } else {
      row_probs.push_back(prob);
    }
  }

  if (rollback_rows) {
    Tensor all({n_rows, static_cast<std::size_t>(cfg.n_classes)});
    for (std::size_t i = 0; i < n_rows; ++i)
      for (int k = 0; k < cfg.n_classes; ++k)
        all.at(i, static_cast<std::size_t>(k)) = row_prob_values[i][static_cast<std::size_t>(k)];
    return tape.leaf(std::move(all));
  }
  return tape.vstack(row_probs);
}

}  // namespace flattab
