#include "flattab/autograd.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "flattab/kernels.hpp"

namespace flattab {

namespace {

[[noreturn]] void shape_error(Op op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op_name(op)) + ": incompatible shapes " +
                              a.shape_str() + " and " + b.shape_str());
}

[[noreturn]] void shape_error(Op op, const Tensor& a, const std::string& what) {
  throw std::invalid_argument(std::string(op_name(op)) + ": " + what + " (got shape " +
                              a.shape_str() + ")");
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::matvec: return "matvec";
    case Op::transpose: return "transpose";
    case Op::relu: return "relu";
    case Op::leaky_relu: return "leaky_relu";
    case Op::vexp: return "exp";
    case Op::vlog: return "log";
    case Op::softmax: return "softmax";
    case Op::sum_axis: return "sum";
    case Op::mean_axis: return "mean";
    case Op::sum_all: return "sum_all";
    case Op::mean_all: return "mean_all";
    case Op::block_mean_rows: return "block_mean_rows";
    case Op::vstack: return "vstack";
    case Op::hstack: return "hstack";
    case Op::concat1d: return "concat";
    case Op::slice1d: return "slice";
    case Op::reshape: return "reshape";
    case Op::add_bias: return "add_bias";
    case Op::outer_add: return "outer_add";
    case Op::l2norm: return "l2norm";
    case Op::div_by_scalar: return "div_by";
    case Op::mul_by_scalar: return "mul_by";
    case Op::scale_const: return "scale";
    case Op::pick_class: return "pick_class";
    case Op::clamp_min: return "clamp_min";
  }
  return "?";
}

Tape::Tape(bool track_grad) : track_grad_(track_grad) { nodes_.reserve(256); }

Var Tape::push(Node node) {
  if (track_grad_) node.grad = Tensor(node.value.shape());
  nodes_.push_back(std::move(node));
  return Var{static_cast<uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size())
    throw std::logic_error("Tape: invalid variable handle");
  return nodes_[v.id];
}

const Tensor& Tape::val(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  if (!track_grad_) throw std::logic_error("Tape: gradients disabled on this tape");
  return node(v).grad;
}

void Tape::truncate(std::size_t mark) {
  if (mark > nodes_.size()) throw std::logic_error("Tape::truncate beyond current size");
  nodes_.resize(mark);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::scalar(double v) { return leaf(Tensor::scalar(v)); }

Var Tape::add(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) shape_error(Op::add, av, bv);
  Node n;
  n.op = Op::add;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = Tensor(av.shape());
  kern::active().add(n.value.data(), av.data(), bv.data(), av.size());
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) shape_error(Op::sub, av, bv);
  Node n;
  n.op = Op::sub;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = Tensor(av.shape());
  kern::active().sub(n.value.data(), av.data(), bv.data(), av.size());
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) shape_error(Op::mul, av, bv);
  Node n;
  n.op = Op::mul;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = Tensor(av.shape());
  kern::active().mul(n.value.data(), av.data(), bv.data(), av.size());
  return push(std::move(n));
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
    shape_error(Op::matmul, av, bv);
  Node n;
  n.op = Op::matmul;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = Tensor({av.rows(), bv.cols()});
  kern::active().matmul(n.value.data(), av.data(), bv.data(), av.rows(), av.cols(), bv.cols());
  return push(std::move(n));
}

Var Tape::matvec(Var a, Var x) {
  const Tensor& av = val(a);
  const Tensor& xv = val(x);
  if (av.rank() != 2 || xv.rank() != 1 || av.cols() != xv.size())
    shape_error(Op::matvec, av, xv);
  Node n;
  n.op = Op::matvec;
  n.p0 = a.id;
  n.p1 = x.id;
  n.value = Tensor({av.rows()});
  for (std::size_t i = 0; i < av.rows(); ++i)
    n.value[i] = kern::active().dot(av.data() + i * av.cols(), xv.data(), av.cols());
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  const Tensor& av = val(a);
  if (av.rank() != 2) shape_error(Op::transpose, av, "expected a matrix");
  const std::size_t m = av.rows(), c = av.cols();
  Node n;
  n.op = Op::transpose;
  n.p0 = a.id;
  n.value = Tensor({c, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) n.value[j * m + i] = av[i * c + j];
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::relu;
  n.p0 = a.id;
  n.value = Tensor(av.shape());
  kern::active().relu(n.value.data(), av.data(), av.size());
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::leaky_relu;
  n.p0 = a.id;
  n.c = slope;
  n.value = Tensor(av.shape());
  kern::active().leaky_relu(n.value.data(), slope, av.data(), av.size());
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::vexp;
  n.p0 = a.id;
  n.value = Tensor(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = std::exp(av[i]);
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::vlog;
  n.p0 = a.id;
  n.value = Tensor(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = std::log(av[i]);
  return push(std::move(n));
}

namespace {

// One softmax slice: out = softmax(in) over `len` entries with stride.
void softmax_slice(double* out, const double* in, std::size_t len, std::size_t stride) {
  double mx = in[0];
  for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double e = std::exp(in[i * stride] - mx);
    out[i * stride] = e;
    total += e;
  }
  const double inv = 1.0 / total;
  for (std::size_t i = 0; i < len; ++i) out[i * stride] *= inv;
}

void softmax_slice_grad(double* gin, const double* y, const double* gout, std::size_t len,
                        std::size_t stride) {
  double dot = 0.0;
  for (std::size_t i = 0; i < len; ++i) dot += y[i * stride] * gout[i * stride];
  for (std::size_t i = 0; i < len; ++i)
    gin[i * stride] += y[i * stride] * (gout[i * stride] - dot);
}

}  // namespace

Var Tape::softmax(Var a, int axis) {
  const Tensor& av = val(a);
  if (av.rank() == 0 || (av.rank() == 1 && axis != 0) || av.rank() > 2 ||
      (av.rank() == 2 && axis != 0 && axis != 1))
    shape_error(Op::softmax, av, "unsupported axis " + std::to_string(axis));
  Node n;
  n.op = Op::softmax;
  n.p0 = a.id;
  n.axis = axis;
  n.value = Tensor(av.shape());
  if (av.rank() == 1) {
    softmax_slice(n.value.data(), av.data(), av.size(), 1);
  } else if (axis == 1) {
    for (std::size_t i = 0; i < av.rows(); ++i)
      softmax_slice(n.value.data() + i * av.cols(), av.data() + i * av.cols(), av.cols(), 1);
  } else {
    for (std::size_t j = 0; j < av.cols(); ++j)
      softmax_slice(n.value.data() + j, av.data() + j, av.rows(), av.cols());
  }
  return push(std::move(n));
}

Var Tape::sum(Var a, int axis) {
  const Tensor& av = val(a);
  if (av.rank() != 2 || (axis != 0 && axis != 1))
    shape_error(Op::sum_axis, av, "expected a matrix and axis 0 or 1");
  Node n;
  n.op = Op::sum_axis;
  n.p0 = a.id;
  n.axis = axis;
  if (axis == 0) {
    n.value = Tensor({av.cols()});
    for (std::size_t i = 0; i < av.rows(); ++i)
      kern::active().add(n.value.data(), n.value.data(), av.data() + i * av.cols(), av.cols());
  } else {
    n.value = Tensor({av.rows()});
    for (std::size_t i = 0; i < av.rows(); ++i)
      n.value[i] = kern::active().sum(av.data() + i * av.cols(), av.cols());
  }
  return push(std::move(n));
}

Var Tape::mean(Var a, int axis) {
  const Tensor& av = val(a);
  if (av.rank() != 2 || (axis != 0 && axis != 1))
    shape_error(Op::mean_axis, av, "expected a matrix and axis 0 or 1");
  Node n;
  n.op = Op::mean_axis;
  n.p0 = a.id;
  n.axis = axis;
  const double inv = axis == 0 ? 1.0 / static_cast<double>(av.rows())
                               : 1.0 / static_cast<double>(av.cols());
  if (axis == 0) {
    n.value = Tensor({av.cols()});
    for (std::size_t i = 0; i < av.rows(); ++i)
      kern::active().add(n.value.data(), n.value.data(), av.data() + i * av.cols(), av.cols());
    kern::active().scale(n.value.data(), inv, n.value.data(), av.cols());
  } else {
    n.value = Tensor({av.rows()});
    for (std::size_t i = 0; i < av.rows(); ++i)
      n.value[i] = inv * kern::active().sum(av.data() + i * av.cols(), av.cols());
  }
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::sum_all;
  n.p0 = a.id;
  n.value = Tensor::scalar(kern::active().sum(av.data(), av.size()));
  return push(std::move(n));
}

Var Tape::mean_all(Var a) {
  const Tensor& av = val(a);
  if (av.size() == 0) shape_error(Op::mean_all, av, "empty tensor");
  Node n;
  n.op = Op::mean_all;
  n.p0 = a.id;
  n.value =
      Tensor::scalar(kern::active().sum(av.data(), av.size()) / static_cast<double>(av.size()));
  return push(std::move(n));
}

Var Tape::block_mean_rows(Var a, std::size_t block) {
  const Tensor& av = val(a);
  if (av.rank() != 2 || block == 0 || av.rows() % block != 0)
    shape_error(Op::block_mean_rows, av, "rows not divisible by block " + std::to_string(block));
  const std::size_t b = av.rows() / block, d = av.cols();
  Node n;
  n.op = Op::block_mean_rows;
  n.p0 = a.id;
  n.offset = block;
  n.value = Tensor({b, d});
  const double inv = 1.0 / static_cast<double>(block);
  for (std::size_t g = 0; g < b; ++g) {
    double* out = n.value.data() + g * d;
    for (std::size_t r = 0; r < block; ++r)
      kern::active().add(out, out, av.data() + (g * block + r) * d, d);
    kern::active().scale(out, inv, out, d);
  }
  return push(std::move(n));
}

namespace {
std::size_t part_rows(const Tensor& t) { return t.rank() == 1 ? 1 : t.rows(); }
std::size_t part_cols(const Tensor& t) { return t.rank() == 1 ? t.size() : t.cols(); }
}  // namespace

Var Tape::vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no inputs");
  const std::size_t c = part_cols(val(parts[0]));
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = val(p);
    if (t.rank() > 2 || part_cols(t) != c) shape_error(Op::vstack, t, val(parts[0]));
    total += part_rows(t);
  }
  Node n;
  n.op = Op::vstack;
  n.value = Tensor({total, c});
  double* out = n.value.data();
  for (Var p : parts) {
    const Tensor& t = val(p);
    std::memcpy(out, t.data(), t.size() * sizeof(double));
    out += t.size();
    n.extra.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::hstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no inputs");
  const std::size_t m = val(parts[0]).rank() == 2 ? val(parts[0]).rows() : 0;
  if (m == 0) shape_error(Op::hstack, val(parts[0]), "expected matrices");
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = val(p);
    if (t.rank() != 2 || t.rows() != m) shape_error(Op::hstack, t, val(parts[0]));
    total += t.cols();
  }
  Node n;
  n.op = Op::hstack;
  n.value = Tensor({m, total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = val(p);
    for (std::size_t i = 0; i < m; ++i)
      std::memcpy(n.value.data() + i * total + off, t.data() + i * t.cols(),
                  t.cols() * sizeof(double));
    off += t.cols();
    n.extra.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  bool all_vec = true;
  for (Var p : parts) all_vec = all_vec && val(p).rank() == 1;
  if (all_vec && axis == 0) {
    std::size_t total = 0;
    for (Var p : parts) total += val(p).size();
    Node n;
    n.op = Op::concat1d;
    n.value = Tensor({total});
    double* out = n.value.data();
    for (Var p : parts) {
      const Tensor& t = val(p);
      std::memcpy(out, t.data(), t.size() * sizeof(double));
      out += t.size();
      n.extra.push_back(p.id);
    }
    return push(std::move(n));
  }
  if (axis == 0) return vstack(parts);
  if (axis == 1) return hstack(parts);
  throw std::invalid_argument("concat: unsupported axis " + std::to_string(axis));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
  const Tensor& av = val(a);
  if (av.rank() != 1 || offset + len > av.size())
    shape_error(Op::slice1d, av,
                "slice [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                    ") out of range");
  Node n;
  n.op = Op::slice1d;
  n.p0 = a.id;
  n.offset = offset;
  n.value = Tensor({len});
  std::memcpy(n.value.data(), av.data() + offset, len * sizeof(double));
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& av = val(a);
  if (shape_size(shape) != av.size())
    shape_error(Op::reshape, av, "cannot reshape to requested size");
  Node n;
  n.op = Op::reshape;
  n.p0 = a.id;
  n.value = Tensor(std::move(shape));
  std::memcpy(n.value.data(), av.data(), av.size() * sizeof(double));
  return push(std::move(n));
}

Var Tape::add_bias(Var a, Var bias) {
  const Tensor& av = val(a);
  const Tensor& bv = val(bias);
  if (av.rank() != 2 || bv.rank() != 1 || bv.size() != av.cols())
    shape_error(Op::add_bias, av, bv);
  Node n;
  n.op = Op::add_bias;
  n.p0 = a.id;
  n.p1 = bias.id;
  n.value = Tensor(av.shape());
  for (std::size_t i = 0; i < av.rows(); ++i)
    kern::active().add(n.value.data() + i * av.cols(), av.data() + i * av.cols(), bv.data(),
                       av.cols());
  return push(std::move(n));
}

Var Tape::outer_add(Var u, Var v) {
  const Tensor& uv = val(u);
  const Tensor& vv = val(v);
  if (uv.rank() != 1 || vv.rank() != 1) shape_error(Op::outer_add, uv, vv);
  Node n;
  n.op = Op::outer_add;
  n.p0 = u.id;
  n.p1 = v.id;
  n.value = Tensor({uv.size(), vv.size()});
  for (std::size_t i = 0; i < uv.size(); ++i) {
    double* row = n.value.data() + i * vv.size();
    for (std::size_t j = 0; j < vv.size(); ++j) row[j] = uv[i] + vv[j];
  }
  return push(std::move(n));
}

Var Tape::l2norm(Var a) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::l2norm;
  n.p0 = a.id;
  n.value = Tensor::scalar(std::sqrt(kern::active().dot(av.data(), av.data(), av.size())));
  return push(std::move(n));
}

Var Tape::div_by(Var a, Var s) {
  const Tensor& av = val(a);
  const Tensor& sv = val(s);
  if (sv.size() != 1) shape_error(Op::div_by_scalar, av, sv);
  Node n;
  n.op = Op::div_by_scalar;
  n.p0 = a.id;
  n.p1 = s.id;
  n.value = Tensor(av.shape());
  kern::active().scale(n.value.data(), 1.0 / sv.scalar_value(), av.data(), av.size());
  return push(std::move(n));
}

Var Tape::mul_by(Var a, Var s) {
  const Tensor& av = val(a);
  const Tensor& sv = val(s);
  if (sv.size() != 1) shape_error(Op::mul_by_scalar, av, sv);
  Node n;
  n.op = Op::mul_by_scalar;
  n.p0 = a.id;
  n.p1 = s.id;
  n.value = Tensor(av.shape());
  kern::active().scale(n.value.data(), sv.scalar_value(), av.data(), av.size());
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::scale_const;
  n.p0 = a.id;
  n.c = c;
  n.value = Tensor(av.shape());
  kern::active().scale(n.value.data(), c, av.data(), av.size());
  return push(std::move(n));
}

Var Tape::pick_class(Var probs, const std::vector<int>& labels) {
  const Tensor& pv = val(probs);
  if (pv.rank() != 2 || pv.rows() != labels.size())
    shape_error(Op::pick_class, pv, "label count " + std::to_string(labels.size()));
  Node n;
  n.op = Op::pick_class;
  n.p0 = probs.id;
  n.idx = labels;
  n.value = Tensor({pv.rows()});
  for (std::size_t i = 0; i < pv.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= pv.cols())
      throw std::invalid_argument("pick_class: label " + std::to_string(y) +
                                  " out of range for " + pv.shape_str());
    n.value[i] = pv.at(i, static_cast<std::size_t>(y));
  }
  return push(std::move(n));
}

Var Tape::clamp_min(Var a, double lo) {
  const Tensor& av = val(a);
  Node n;
  n.op = Op::clamp_min;
  n.p0 = a.id;
  n.c = lo;
  n.value = Tensor(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] > lo ? av[i] : lo;
  return push(std::move(n));
}

std::vector<uint32_t> Tape::parent_list(const Node& n) const {
  std::vector<uint32_t> out;
  if (n.p0 != UINT32_MAX) out.push_back(n.p0);
  if (n.p1 != UINT32_MAX) out.push_back(n.p1);
  for (uint32_t e : n.extra) out.push_back(e);
  return out;
}

void Tape::backward(Var root) {
  if (!track_grad_) throw std::logic_error("Tape::backward: gradients disabled on this tape");
  const Node& r = node(root);
  if (r.value.size() != 1)
    throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                r.value.shape_str());

  // Reachability pass: only nodes the root depends on receive gradient work.
  std::vector<char> reach(nodes_.size(), 0);
  reach[root.id] = 1;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (!reach[id]) continue;
    const Node& n = nodes_[id];
    if (n.p0 != UINT32_MAX) reach[n.p0] = 1;
    if (n.p1 != UINT32_MAX) reach[n.p1] = 1;
    for (uint32_t e : n.extra) reach[e] = 1;
  }

  nodes_[root.id].grad.fill(1.0);
  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (reach[id] && nodes_[id].op != Op::leaf) backprop(static_cast<uint32_t>(id));
  }
}

void Tape::backprop(uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const kern::KernelTable& k = kern::active();
  auto gp = [&](uint32_t pid) -> Tensor& { return nodes_[pid].grad; };
  auto vp = [&](uint32_t pid) -> const Tensor& { return nodes_[pid].value; };

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::add:
      k.add(gp(n.p0).data(), gp(n.p0).data(), g.data(), g.size());
      k.add(gp(n.p1).data(), gp(n.p1).data(), g.data(), g.size());
      break;
    case Op::sub:
      k.add(gp(n.p0).data(), gp(n.p0).data(), g.data(), g.size());
      k.axpy(gp(n.p1).data(), -1.0, g.data(), g.size());
      break;
    case Op::mul:
      k.mul_acc(gp(n.p0).data(), g.data(), vp(n.p1).data(), g.size());
      k.mul_acc(gp(n.p1).data(), g.data(), vp(n.p0).data(), g.size());
      break;
    case Op::matmul: {
      const Tensor& a = vp(n.p0);
      const Tensor& b = vp(n.p1);
      // dA += g B^T ; dB += A^T g
      k.matmul_abt_acc(gp(n.p0).data(), g.data(), b.data(), a.rows(), a.cols(), b.cols());
      k.matmul_atb_acc(gp(n.p1).data(), a.data(), g.data(), a.rows(), a.cols(), b.cols());
      break;
    }
    case Op::matvec: {
      const Tensor& a = vp(n.p0);
      const Tensor& x = vp(n.p1);
      Tensor& ga = gp(n.p0);
      Tensor& gx = gp(n.p1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        k.axpy(ga.data() + i * a.cols(), g[i], x.data(), a.cols());
        k.axpy(gx.data(), g[i], a.data() + i * a.cols(), a.cols());
      }
      break;
    }
    case Op::transpose: {
      Tensor& ga = gp(n.p0);
      const std::size_t m = ga.rows(), c = ga.cols();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * m + i];
      break;
    }
    case Op::relu:
      k.relu_acc_grad(gp(n.p0).data(), vp(n.p0).data(), g.data(), g.size());
      break;
    case Op::leaky_relu:
      k.leaky_relu_acc_grad(gp(n.p0).data(), n.c, vp(n.p0).data(), g.data(), g.size());
      break;
    case Op::vexp:
      k.mul_acc(gp(n.p0).data(), g.data(), n.value.data(), g.size());
      break;
    case Op::vlog: {
      Tensor& ga = gp(n.p0);
      const Tensor& a = vp(n.p0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
      break;
    }
    case Op::softmax: {
      Tensor& ga = gp(n.p0);
      const Tensor& y = n.value;
      if (y.rank() == 1) {
        softmax_slice_grad(ga.data(), y.data(), g.data(), y.size(), 1);
      } else if (n.axis == 1) {
        for (std::size_t i = 0; i < y.rows(); ++i)
          softmax_slice_grad(ga.data() + i * y.cols(), y.data() + i * y.cols(),
                             g.data() + i * y.cols(), y.cols(), 1);
      } else {
        for (std::size_t j = 0; j < y.cols(); ++j)
          softmax_slice_grad(ga.data() + j, y.data() + j, g.data() + j, y.rows(), y.cols());
      }
      break;
    }
    case Op::sum_axis: {
      Tensor& ga = gp(n.p0);
      if (n.axis == 0) {
        for (std::size_t i = 0; i < ga.rows(); ++i)
          k.add(ga.data() + i * ga.cols(), ga.data() + i * ga.cols(), g.data(), ga.cols());
      } else {
        for (std::size_t i = 0; i < ga.rows(); ++i) {
          double* row = ga.data() + i * ga.cols();
          for (std::size_t j = 0; j < ga.cols(); ++j) row[j] += g[i];
        }
      }
      break;
    }
    case Op::mean_axis: {
      Tensor& ga = gp(n.p0);
      if (n.axis == 0) {
        const double inv = 1.0 / static_cast<double>(ga.rows());
        for (std::size_t i = 0; i < ga.rows(); ++i)
          k.axpy(ga.data() + i * ga.cols(), inv, g.data(), ga.cols());
      } else {
        const double inv = 1.0 / static_cast<double>(ga.cols());
        for (std::size_t i = 0; i < ga.rows(); ++i) {
          double* row = ga.data() + i * ga.cols();
          const double gv = g[i] * inv;
          for (std::size_t j = 0; j < ga.cols(); ++j) row[j] += gv;
        }
      }
      break;
    }
    case Op::sum_all: {
      Tensor& ga = gp(n.p0);
      const double gv = g.scalar_value();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
      break;
    }
    case Op::mean_all: {
      Tensor& ga = gp(n.p0);
      const double gv = g.scalar_value() / static_cast<double>(ga.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
      break;
    }
    case Op::block_mean_rows: {
      Tensor& ga = gp(n.p0);
      const std::size_t block = n.offset, d = ga.cols();
      const double inv = 1.0 / static_cast<double>(block);
      for (std::size_t gidx = 0; gidx < n.value.rows(); ++gidx)
        for (std::size_t r = 0; r < block; ++r)
          k.axpy(ga.data() + (gidx * block + r) * d, inv, g.data() + gidx * d, d);
      break;
    }
    case Op::vstack:
    case Op::concat1d: {
      std::size_t off = 0;
      for (uint32_t pid : n.extra) {
        Tensor& ga = gp(pid);
        k.add(ga.data(), ga.data(), g.data() + off, ga.size());
        off += ga.size();
      }
      break;
    }
    case Op::hstack: {
      const std::size_t total = n.value.cols();
      std::size_t off = 0;
      for (uint32_t pid : n.extra) {
        Tensor& ga = gp(pid);
        const std::size_t c = ga.cols();
        for (std::size_t i = 0; i < ga.rows(); ++i)
          k.add(ga.data() + i * c, ga.data() + i * c, g.data() + i * total + off, c);
        off += c;
      }
      break;
    }
    case Op::slice1d:
      k.add(gp(n.p0).data() + n.offset, gp(n.p0).data() + n.offset, g.data(), g.size());
      break;
    case Op::reshape:
      k.add(gp(n.p0).data(), gp(n.p0).data(), g.data(), g.size());
      break;
    case Op::add_bias: {
      Tensor& ga = gp(n.p0);
      Tensor& gb = gp(n.p1);
      k.add(ga.data(), ga.data(), g.data(), g.size());
      for (std::size_t i = 0; i < ga.rows(); ++i)
        k.add(gb.data(), gb.data(), g.data() + i * ga.cols(), ga.cols());
      break;
    }
    case Op::outer_add: {
      Tensor& gu = gp(n.p0);
      Tensor& gv = gp(n.p1);
      const std::size_t m = gu.size(), c = gv.size();
      for (std::size_t i = 0; i < m; ++i) {
        gu[i] += k.sum(g.data() + i * c, c);
        k.add(gv.data(), gv.data(), g.data() + i * c, c);
      }
      break;
    }
    case Op::l2norm: {
      const double norm = n.value.scalar_value();
      if (norm > 0.0)
        k.axpy(gp(n.p0).data(), g.scalar_value() / norm, vp(n.p0).data(), vp(n.p0).size());
      break;
    }
    case Op::div_by_scalar: {
      const double s = vp(n.p1).scalar_value();
      k.axpy(gp(n.p0).data(), 1.0 / s, g.data(), g.size());
      gp(n.p1)[0] -= k.dot(g.data(), vp(n.p0).data(), g.size()) / (s * s);
      break;
    }
    case Op::mul_by_scalar: {
      const double s = vp(n.p1).scalar_value();
      k.axpy(gp(n.p0).data(), s, g.data(), g.size());
      gp(n.p1)[0] += k.dot(g.data(), vp(n.p0).data(), g.size());
      break;
    }
    case Op::scale_const:
      k.axpy(gp(n.p0).data(), n.c, g.data(), g.size());
      break;
    case Op::pick_class: {
      Tensor& ga = gp(n.p0);
      for (std::size_t i = 0; i < n.idx.size(); ++i)
        ga[i * ga.cols() + static_cast<std::size_t>(n.idx[i])] += g[i];
      break;
    }
    case Op::clamp_min: {
      Tensor& ga = gp(n.p0);
      const Tensor& a = vp(n.p0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] > n.c) ga[i] += g[i];
      break;
    }
  }
}

}  // namespace flattab
