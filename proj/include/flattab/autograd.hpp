#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flattab/tensor.hpp"

namespace flattab {

class Tape;

// Handle into a tape. Cheap to copy; only meaningful with the tape that
// created it.
struct Var {
  uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class Op : uint8_t {
  leaf,
  add,
  sub,
  mul,
  matmul,
  matvec,
  transpose,
  relu,
  leaky_relu,
  vexp,
  vlog,
  softmax,
  sum_axis,
  mean_axis,
  sum_all,
  mean_all,
  block_mean_rows,
  vstack,
  hstack,
  concat1d,
  slice1d,
  reshape,
  add_bias,
  outer_add,
  l2norm,
  div_by_scalar,
  mul_by_scalar,
  scale_const,
  pick_class,
  clamp_min,
};

const char* op_name(Op op);

// Reverse-mode tape over Tensor values. Operations record their inputs as
// they execute; backward() walks the recorded order in reverse and
// accumulates gradients additively, so fan-out sums path contributions.
//
// A tape is confined to one thread. Independent tapes may run concurrently.
class Tape {
 public:
  explicit Tape(bool track_grad = true);

  Var leaf(Tensor value);
  Var scalar(double v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var neg(Var a);
  Var matmul(Var a, Var b);       // [m,k] x [k,n] -> [m,n]
  Var matvec(Var a, Var x);       // [m,n] x [n] -> [m]
  Var transpose(Var a);           // [m,n] -> [n,m]
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var exp(Var a);
  Var log(Var a);
  // axis 0 normalizes down columns, axis 1 along rows; rank-1 input uses
  // axis 0. Max-subtracted for stability.
  Var softmax(Var a, int axis);
  Var sum(Var a, int axis);       // rank-2: axis 0 -> [n], axis 1 -> [m]
  Var mean(Var a, int axis);
  Var sum_all(Var a);
  Var mean_all(Var a);
  // [b*block, d] -> [b, d]; row i is the mean of rows [i*block, (i+1)*block).
  Var block_mean_rows(Var a, std::size_t block);
  // Parts stacked as rows; rank-1 parts count as single rows.
  Var vstack(std::span<const Var> parts);
  // Parts joined along columns; all parts share the row count.
  Var hstack(std::span<const Var> parts);
  Var concat(std::span<const Var> parts, int axis);
  Var slice(Var a, std::size_t offset, std::size_t len);  // rank-1
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var add_bias(Var a, Var bias);  // [m,n] + [n] broadcast over rows
  Var outer_add(Var u, Var v);    // out[i,j] = u[i] + v[j]
  Var l2norm(Var a);
  Var div_by(Var a, Var s);       // s holds a single element
  Var mul_by(Var a, Var s);
  Var scale(Var a, double c);
  Var pick_class(Var probs, const std::vector<int>& labels);  // [m,K] -> [m]
  Var clamp_min(Var a, double lo);

  // root must hold a single element. Gradients of every node reachable from
  // root are populated; unreachable nodes keep zero grad.
  void backward(Var root);

  const Tensor& val(Var v) const;
  const Tensor& grad(Var v) const;
  double val_scalar(Var v) const { return val(v).scalar_value(); }
  bool grad_enabled() const { return track_grad_; }

  std::size_t size() const { return nodes_.size(); }
  // Drops nodes with id >= mark; handles created after the mark become
  // invalid. Used to bound memory on grad-free inference passes.
  void truncate(std::size_t mark);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::leaf;
    uint32_t p0 = UINT32_MAX;
    uint32_t p1 = UINT32_MAX;
    std::vector<uint32_t> extra;  // parents beyond two (stacks/concats)
    int axis = 0;
    double c = 0.0;
    std::size_t offset = 0;
    std::vector<int> idx;  // pick_class labels
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void backprop(uint32_t id);
  std::vector<uint32_t> parent_list(const Node& n) const;

  std::vector<Node> nodes_;
  bool track_grad_;
};

}  // namespace flattab
