#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "flattab/trainer.hpp"

namespace flattab {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'F', 'L', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; add byte swapping for this platform");

json config_to_json(const ModelConfig& c) {
  return json{{"n_classes", c.n_classes},   {"d_e", c.d_e},
              {"d_c", c.d_c},               {"enc_hidden", c.enc_hidden},
              {"gat_layers", c.gat_layers}, {"gat_heads", c.gat_heads},
              {"gat_hidden", c.gat_hidden}, {"gat_out", c.gat_out}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_classes = j.at("n_classes");
  c.d_e = j.at("d_e");
  c.d_c = j.at("d_c");
  c.enc_hidden = j.at("enc_hidden");
  c.gat_layers = j.at("gat_layers");
  c.gat_heads = j.at("gat_heads");
  c.gat_hidden = j.at("gat_hidden");
  c.gat_out = j.at("gat_out");
  return c;
}

json train_to_json(const TrainConfig& c) {
  return json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"eps", c.eps},
              {"weight_decay", c.weight_decay},
              {"n_meta", c.n_meta},
              {"n_target", c.n_target},
              {"column_subsample", c.column_subsample},
              {"seed", c.seed},
              {"log_every", c.log_every},
              {"theta_value", c.theta_value}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.steps = j.at("steps");
  c.batch_size = j.at("batch_size");
  c.lr = j.at("lr");
  c.eps = j.at("eps");
  c.weight_decay = j.at("weight_decay");
  c.n_meta = j.at("n_meta");
  c.n_target = j.at("n_target");
  c.column_subsample = j.at("column_subsample");
  c.seed = j.at("seed");
  c.log_every = j.at("log_every");
  c.theta_value = j.at("theta_value");
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["format_version"] = ckpt.format_version;
  header["model_config"] = config_to_json(ckpt.params.cfg);
  header["train_config"] = train_to_json(ckpt.train_cfg);
  header["step"] = ckpt.step;
  header["opt_step"] = ckpt.opt.step_count();
  {
    json rng = json::array();
    for (uint64_t w : ckpt.data_rng.state()) {
      char hex[17];
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(w));
      rng.push_back(hex);
    }
    header["data_rng"] = rng;
  }
  header["train_datasets"] = ckpt.train_dataset_names;

  std::vector<const Tensor*> blobs;
  json tensors = json::array();
  auto list = [&](const std::string& name, const Tensor& t) {
    tensors.push_back(json{{"name", name}, {"shape", t.shape()}});
    blobs.push_back(&t);
  };
  for (const auto& [name, t] : ckpt.params.named_tensors()) list(name, *t);
  const auto named = ckpt.params.named_tensors();
  if (!ckpt.opt.moment1().empty()) {
    if (ckpt.opt.moment1().size() != named.size())
      throw std::runtime_error("save_checkpoint: optimizer state does not match parameters");
    for (std::size_t i = 0; i < named.size(); ++i)
      list("opt.m." + named[i].first, ckpt.opt.moment1()[i]);
    for (std::size_t i = 0; i < named.size(); ++i)
      list("opt.v." + named[i].first, ckpt.opt.moment2()[i]);
  }
  header["tensors"] = tensors;

  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Tensor* t : blobs)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_checkpoint: failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported format version " +
                             std::to_string(version));
  uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header in '" + path + "'");
  const json header = json::parse(head);

  Checkpoint ckpt;
  ckpt.format_version = header.at("format_version");
  ckpt.train_cfg = train_from_json(header.at("train_config"));
  const ModelConfig mcfg = config_from_json(header.at("model_config"));
  {
    Rng dummy(0);
    ckpt.params = ModelParams::init(mcfg, dummy);
  }
  ckpt.step = header.at("step");
  {
    std::array<uint64_t, 4> state{};
    const json& rng = header.at("data_rng");
    for (std::size_t i = 0; i < 4; ++i)
      state[i] = std::stoull(rng.at(i).get<std::string>(), nullptr, 16);
    ckpt.data_rng = Rng::from_state(state);
  }
  ckpt.train_dataset_names = header.at("train_datasets").get<std::vector<std::string>>();

  auto named = ckpt.params.named_tensors();
  std::size_t cursor = 0;
  std::vector<Tensor> m_moments, v_moments;
  auto read_tensor = [&in, &path](Tensor& t) {
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated tensor data in '" + path + "'");
  };
  for (const json& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    Tensor t(shape);
    read_tensor(t);
    if (name.rfind("opt.m.", 0) == 0) {
      m_moments.push_back(std::move(t));
    } else if (name.rfind("opt.v.", 0) == 0) {
      v_moments.push_back(std::move(t));
    } else {
      if (cursor >= named.size() || named[cursor].first != name)
        throw std::runtime_error("load_checkpoint: unexpected tensor '" + name + "' in '" +
                                 path + "'");
      if (!named[cursor].second->same_shape(t))
        throw std::runtime_error("load_checkpoint: tensor '" + name + "' has shape " +
                                 t.shape_str() + ", expected " +
                                 named[cursor].second->shape_str());
      *named[cursor].second = std::move(t);
      ++cursor;
    }
  }
  if (cursor != named.size())
    throw std::runtime_error("load_checkpoint: missing tensors in '" + path + "'");

  ckpt.opt = AdamW(AdamConfig{.lr = ckpt.train_cfg.lr,
                              .beta1 = 0.9,
                              .beta2 = 0.999,
                              .eps = ckpt.train_cfg.eps,
                              .weight_decay = ckpt.train_cfg.weight_decay});
  if (!m_moments.empty())
    ckpt.opt.restore(std::move(m_moments), std::move(v_moments), header.at("opt_step"));
  return ckpt;
}

}  // namespace flattab
