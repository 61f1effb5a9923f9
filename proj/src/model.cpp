#include "flattab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace flattab {

void ModelConfig::validate() const {
  if (n_classes < 2) throw std::invalid_argument("ModelConfig: n_classes must be at least 2");
  if (d_e < 1 || d_c < 1 || enc_hidden < 1)
    throw std::invalid_argument("ModelConfig: embedding widths must be positive");
  if (gat_layers < 1 || gat_heads < 1)
    throw std::invalid_argument("ModelConfig: gat_layers and gat_heads must be positive");
  if (gat_hidden % gat_heads != 0 || gat_out % gat_heads != 0)
    throw std::invalid_argument("ModelConfig: gat widths must divide evenly across heads");
}

namespace {

Linear make_linear(int in, int out, bool bias, Rng& rng) {
  Linear l;
  l.w = Tensor({static_cast<std::size_t>(in), static_cast<std::size_t>(out)});
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (std::size_t i = 0; i < l.w.size(); ++i) l.w[i] = rng.uniform(-bound, bound);
  if (bias) l.b = Tensor({static_cast<std::size_t>(out)});
  return l;
}

std::vector<Linear> make_mlp2(int in, int hidden, int out, Rng& rng) {
  std::vector<Linear> layers;
  layers.push_back(make_linear(in, hidden, true, rng));
  layers.push_back(make_linear(hidden, out, true, rng));
  return layers;
}

std::vector<Linear> make_residual(int in, int width, Rng& rng) {
  std::vector<Linear> blocks;
  blocks.push_back(make_linear(in, width, true, rng));
  for (int i = 1; i < 4; ++i) blocks.push_back(make_linear(width, width, true, rng));
  return blocks;
}

void list_linears(const std::string& prefix, const std::vector<Linear>& layers,
                  std::vector<std::pair<std::string, const Tensor*>>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(prefix + std::to_string(i) + ".w", &layers[i].w);
    if (layers[i].has_bias()) out.emplace_back(prefix + std::to_string(i) + ".b", &layers[i].b);
  }
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  p.enc.f1 = make_residual(cfg.f1_in(), cfg.enc_hidden, rng);
  p.enc.f2 = make_mlp2(cfg.enc_hidden, cfg.enc_hidden, cfg.enc_hidden, rng);
  p.enc.f3 = make_residual(cfg.enc_hidden, cfg.d_e, rng);
  p.enc.g = make_mlp2(cfg.enc_hidden, cfg.enc_hidden, cfg.d_c, rng);
  for (int l = 0; l < cfg.gat_layers; ++l)
    p.dec.h.push_back(make_linear(cfg.d_e, cfg.generated_size(l), false, rng));
  p.dec.h.push_back(make_linear(cfg.d_e, cfg.classifier_size(), false, rng));
  p.dec.log_theta = Tensor({4});  // log(1) = 0
  return p;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  list_linears("enc.f1.", enc.f1, out);
  list_linears("enc.f2.", enc.f2, out);
  list_linears("enc.f3.", enc.f3, out);
  list_linears("enc.g.", enc.g, out);
  list_linears("dec.h.", dec.h, out);
  out.emplace_back("dec.log_theta", &dec.log_theta);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, t] : std::as_const(*this).named_tensors())
    out.emplace_back(name, const_cast<Tensor*>(t));
  return out;
}

uint64_t ModelParams::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : named_tensors()) {
    mix(name.data(), name.size());
    mix(t->data(), t->size() * sizeof(double));
  }
  return h;
}

void set_theta_fixed(ModelParams& params, double value) {
  if (!(value > 0.0))
    throw std::invalid_argument("set_theta_fixed: norm must be positive, got " +
                                std::to_string(value));
  params.dec.log_theta.fill(std::log(value));
}

void set_theta_recorded(ModelParams& params, const ModelParams& trained) {
  if (!params.dec.log_theta.same_shape(trained.dec.log_theta))
    throw std::invalid_argument("set_theta_recorded: incompatible theta shapes");
  params.dec.log_theta = trained.dec.log_theta;
}

namespace {

std::vector<BoundLinear> bind_linears(Tape& tape, const std::vector<Linear>& layers,
                                      std::vector<Var>& slots) {
  std::vector<BoundLinear> out;
  for (const Linear& l : layers) {
    BoundLinear b;
    b.w = tape.leaf(l.w);
    slots.push_back(b.w);
    if (l.has_bias()) {
      b.b = tape.leaf(l.b);
      slots.push_back(b.b);
    }
    out.push_back(b);
  }
  return out;
}

}  // namespace

BoundModel bind_model(Tape& tape, const ModelParams& params) {
  BoundModel m;
  m.f1 = bind_linears(tape, params.enc.f1, m.slots);
  m.f2 = bind_linears(tape, params.enc.f2, m.slots);
  m.f3 = bind_linears(tape, params.enc.f3, m.slots);
  m.g = bind_linears(tape, params.enc.g, m.slots);
  for (const Linear& l : params.dec.h) {
    Var w = tape.leaf(l.w);
    m.dec_h.push_back(w);
    m.slots.push_back(w);
  }
  m.log_theta = tape.leaf(params.dec.log_theta);
  m.slots.push_back(m.log_theta);
  return m;
}

BoundModel bind_model_from(const ModelParams& shape_ref, const std::vector<Var>& slots) {
  BoundModel m;
  std::size_t idx = 0;
  auto take = [&](const std::vector<Linear>& layers) {
    std::vector<BoundLinear> out;
    for (const Linear& l : layers) {
      BoundLinear b;
      b.w = slots.at(idx++);
      if (l.has_bias()) b.b = slots.at(idx++);
      out.push_back(b);
    }
    return out;
  };
  m.f1 = take(shape_ref.enc.f1);
  m.f2 = take(shape_ref.enc.f2);
  m.f3 = take(shape_ref.enc.f3);
  m.g = take(shape_ref.enc.g);
  for (std::size_t l = 0; l < shape_ref.dec.h.size(); ++l) m.dec_h.push_back(slots.at(idx++));
  m.log_theta = slots.at(idx++);
  if (idx != slots.size())
    throw std::invalid_argument("bind_model_from: slot count does not match the parameter list");
  m.slots = slots;
  return m;
}

Var mlp2_forward(Tape& tape, const std::vector<BoundLinear>& layers, Var x) {
  Var h = tape.relu(tape.add_bias(tape.matmul(x, layers[0].w), layers[0].b));
  return tape.add_bias(tape.matmul(h, layers[1].w), layers[1].b);
}

Var residual_mlp_forward(Tape& tape, const std::vector<BoundLinear>& blocks, Var x) {
  // First block has no skip (its input width differs from the body).
  Var h = tape.relu(tape.add_bias(tape.matmul(x, blocks[0].w), blocks[0].b));
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    Var out = tape.relu(tape.add_bias(tape.matmul(h, blocks[i].w), blocks[i].b));
    h = tape.add(out, h);
  }
  return h;
}

}  // namespace flattab
