#include "flattab/encoder.hpp"

#include <stdexcept>

namespace flattab {

Tensor build_f1_input(const Tensor& meta_x, const std::vector<int>& meta_y, int n_classes) {
  if (meta_x.rank() != 2 || meta_x.rows() != meta_y.size())
    throw std::invalid_argument("build_f1_input: meta features " + meta_x.shape_str() +
                                " do not match " + std::to_string(meta_y.size()) + " labels");
  if (meta_x.rows() == 0) throw std::invalid_argument("build_f1_input: empty meta split");
  const std::size_t n = meta_x.rows(), c = meta_x.cols();
  const std::size_t ld = n_classes == 2 ? 1 : static_cast<std::size_t>(n_classes);
  Tensor out({n * c, 1 + ld});
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double* row = out.data() + (j * n + i) * (1 + ld);
      row[0] = meta_x.at(i, j);
      if (n_classes == 2) {
        row[1] = static_cast<double>(meta_y[i]);
      } else {
        for (std::size_t k = 0; k < ld; ++k) row[1 + k] = 0.0;
        row[1 + static_cast<std::size_t>(meta_y[i])] = 1.0;
      }
    }
  }
  return out;
}

Var pool_rows(Tape& tape, const BoundModel& m, const Tensor& meta_x,
              const std::vector<int>& meta_y, const ModelConfig& cfg) {
  const std::size_t n = meta_x.rows();
  Var stacked = tape.leaf(build_f1_input(meta_x, meta_y, cfg.n_classes));
  Var feats = residual_mlp_forward(tape, m.f1, stacked);  // [n*c, enc_hidden]
  return tape.block_mean_rows(feats, n);                  // [c, enc_hidden]
}

Var encode_dataset(Tape& tape, const BoundModel& m, Var pooled) {
  Var per_col = mlp2_forward(tape, m.f2, pooled);  // [c, enc_hidden]
  Var mean = tape.mean(per_col, 0);                // [enc_hidden]
  Var row = tape.reshape(mean, {1, tape.val(mean).size()});
  Var e = residual_mlp_forward(tape, m.f3, row);  // [1, d_e]
  return tape.reshape(e, {tape.val(e).cols()});
}

Var encode_columns(Tape& tape, const BoundModel& m, Var pooled) {
  return mlp2_forward(tape, m.g, pooled);  // [c, d_c]
}

}  // namespace flattab
