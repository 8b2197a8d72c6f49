#include "t4c/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "t4c/kernels.hpp"

namespace t4c {

float mse(const Tensor& pred, const Tensor& target) {
  check(pred.dtype() != DType::u8 && target.dtype() != DType::u8, "mse requires float tensors");
  check(pred.dtype() == target.dtype(), "mse dtype mismatch");
  check(pred.shape() == target.shape(),
        "mse shape mismatch: " + pred.shape().str() + " vs " + target.shape().str());
  double v = pred.dtype() == DType::f32
                 ? kernels::mse_fwd(pred.f32().data(), target.f32().data(), pred.count())
                 : kernels::mse_fwd(pred.f64().data(), target.f64().data(), pred.count());
  return static_cast<float>(v);
}

AdamState::AdamState(const ParamStore& params) {
  for (const auto& val : params.values) {
    m.emplace_back(val.shape(), val.dtype());
    v.emplace_back(val.shape(), val.dtype());
  }
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  check(state.m.size() == params.values.size(), "adam state does not match params");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t s = 0; s < params.values.size(); ++s) {
    auto p = params.values[s].f32();
    auto g = params.grads[s].f32();
    auto m = state.m[s].f32();
    auto v = state.v[s].f32();
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      double update = cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

double PlateauScheduler::observe(double loss) {
  if (!best_.has_value()) {
    best_ = loss;
    return lr_;
  }
  if (loss <= *best_ * (1.0 - rel_threshold_)) {
    best_ = loss;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_ = 0;
  }
  return lr_;
}

void TrainConfig::validate() const {
  check(lr > 0.0, "lr must be positive");
  check(plateau_patience >= 1, "patience must be >= 1");
  check(plateau_factor > 0.0 && plateau_factor < 1.0, "plateau factor must be in (0,1)");
  check(max_steps >= 0, "max_steps must be >= 0");
  check(eval_interval >= 1, "eval_interval must be >= 1");
  check(batch_size >= 1, "batch_size must be >= 1");
}

std::optional<std::string> Checkpoint::find(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return std::nullopt;
}

namespace {

void put_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }
void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}
void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
uint8_t get_u8(std::istream& is, const std::string& what) {
  int c = is.get();
  check(c != EOF, what + ": truncated file");
  return static_cast<uint8_t>(c);
}
uint16_t get_u16(std::istream& is, const std::string& what) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  check(is.gcount() == 2, what + ": truncated file");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(is.gcount() == 4, what + ": truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

std::string join_metadata(const std::vector<std::pair<std::string, std::string>>& md) {
  std::string s;
  for (const auto& [k, v] : md) {
    s += k;
    s += '=';
    s += v;
    s += '\n';
  }
  return s;
}

// Shortest-exact decimal for doubles in text metadata.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::set<std::string> names;
  for (const auto& [name, t] : c.tensors) {
    check(names.insert(name).second, "duplicate parameter name: " + name);
    check(t.dtype() == DType::f32, "checkpoint tensors must be f32");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), "cannot open for writing: " + path);
  os.write("T4CK", 4);
  put_u8(os, 1);
  std::string md = join_metadata(c.metadata);
  put_u32(os, static_cast<uint32_t>(md.size()));
  os.write(md.data(), static_cast<std::streamsize>(md.size()));
  put_u32(os, static_cast<uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    check(name.size() <= 0xffff, "parameter name too long");
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u8(os, 1);  // dtype code: f32
    put_u8(os, static_cast<uint8_t>(t.shape().rank()));
    for (int d : t.shape().dims) put_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.byte_size()));
  }
  os.flush();
  check(os.good(), "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  check(is.gcount() == 4 && std::memcmp(magic, "T4CK", 4) == 0,
        path + ": bad magic, not a T4CK checkpoint");
  uint8_t version = get_u8(is, path);
  check(version == 1, path + ": unsupported T4CK version " + std::to_string(version));
  uint32_t md_len = get_u32(is, path);
  std::string md(md_len, '\0');
  is.read(md.data(), md_len);
  check(static_cast<uint32_t>(is.gcount()) == md_len, path + ": truncated metadata");

  Checkpoint c;
  size_t pos = 0;
  while (pos < md.size()) {
    size_t nl = md.find('\n', pos);
    check(nl != std::string::npos, path + ": metadata line without newline");
    std::string line = md.substr(pos, nl - pos);
    pos = nl + 1;
    size_t eq = line.find('=');
    check(eq != std::string::npos, path + ": metadata line without '='");
    c.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }

  uint32_t count = get_u32(is, path);
  std::set<std::string> names;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = get_u16(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    check(is.gcount() == name_len, path + ": truncated tensor name");
    check(names.insert(name).second, path + ": duplicate parameter name: " + name);
    uint8_t dcode = get_u8(is, path);
    check(dcode == 1, path + ": unsupported tensor dtype code " + std::to_string(dcode));
    uint8_t ndim = get_u8(is, path);
    check(ndim >= 1, path + ": tensor rank must be >= 1");
    Shape shape;
    for (int d = 0; d < ndim; ++d) {
      uint32_t e = get_u32(is, path);
      check(e >= 1 && e <= 0x7fffffffu, path + ": invalid extent");
      shape.dims.push_back(static_cast<int>(e));
    }
    Tensor t(std::move(shape), DType::f32);
    is.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.byte_size()));
    check(static_cast<size_t>(is.gcount()) == t.byte_size(), path + ": truncated tensor payload");
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  is.peek();
  check(is.eof(), path + ": trailing bytes after payload");
  return c;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    check(!tok.empty(), "empty entry in integer list '" + s + "'");
    size_t used = 0;
    int v = std::stoi(tok, &used);
    check(used == tok.size(), "bad integer '" + tok + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string meta_of(const Checkpoint& c, const std::string& key) {
  auto v = c.find(key);
  check(v.has_value(), "checkpoint metadata missing key '" + key + "'");
  return *v;
}

}  // namespace

Checkpoint make_checkpoint(const Graph& g, const ParamStore& params, const ModelConfig& cfg,
                           int64_t step, double lr, std::span<const double> loss_tail) {
  check(params.dtype == DType::f32, "checkpoints hold f32 parameters");
  check(params.values.size() == g.params().size(), "param store does not match graph");
  Checkpoint c;
  c.metadata.emplace_back("format", "t4cast-checkpoint");
  c.metadata.emplace_back("model_type", std::to_string(cfg.model_type));
  c.metadata.emplace_back("input_h", std::to_string(cfg.input_h));
  c.metadata.emplace_back("input_w", std::to_string(cfg.input_w));
  c.metadata.emplace_back("input_c", std::to_string(cfg.input_c));
  c.metadata.emplace_back("levels", std::to_string(cfg.levels));
  c.metadata.emplace_back("channels", join_ints(cfg.channels));
  c.metadata.emplace_back("dense_layers", std::to_string(cfg.dense_layers));
  c.metadata.emplace_back("growth", std::to_string(cfg.growth));
  c.metadata.emplace_back("out_channels", std::to_string(cfg.out_channels));
  c.metadata.emplace_back("use_static", cfg.use_static ? "true" : "false");
  c.metadata.emplace_back("step", std::to_string(step));
  c.metadata.emplace_back("lr", fmt_double(lr));
  std::string tail;
  for (size_t i = 0; i < loss_tail.size(); ++i) {
    if (i) tail += ',';
    tail += fmt_double(loss_tail[i]);
  }
  c.metadata.emplace_back("loss_tail", tail);
  for (size_t s = 0; s < params.values.size(); ++s)
    c.tensors.emplace_back(g.params()[s].name, params.values[s]);
  return c;
}

ModelConfig checkpoint_model_config(const Checkpoint& c) {
  ModelConfig cfg;
  cfg.model_type = std::stoi(meta_of(c, "model_type"));
  cfg.input_h = std::stoi(meta_of(c, "input_h"));
  cfg.input_w = std::stoi(meta_of(c, "input_w"));
  cfg.input_c = std::stoi(meta_of(c, "input_c"));
  cfg.levels = std::stoi(meta_of(c, "levels"));
  cfg.channels = split_ints(meta_of(c, "channels"));
  cfg.dense_layers = std::stoi(meta_of(c, "dense_layers"));
  cfg.growth = std::stoi(meta_of(c, "growth"));
  cfg.out_channels = std::stoi(meta_of(c, "out_channels"));
  cfg.use_static = meta_of(c, "use_static") == "true";
  cfg.validate();
  return cfg;
}

void load_params(const Checkpoint& c, const Graph& g, ParamStore& store) {
  check(store.values.size() == g.params().size(), "param store does not match graph");
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : c.tensors) by_name.emplace(name, &t);
  for (size_t s = 0; s < g.params().size(); ++s) {
    const ParamInfo& info = g.params()[s];
    auto it = by_name.find(info.name);
    check(it != by_name.end(), "checkpoint is missing parameter '" + info.name + "'");
    check(it->second->shape() == info.shape,
          "checkpoint parameter '" + info.name + "' has shape " + it->second->shape().str() +
              ", graph expects " + info.shape.str());
    store.values[s] = *it->second;
  }
}

namespace {

double eval_dataset(const Model& model, const ParamStore& params,
                    std::span<const TrainSample> data) {
  double total = 0.0;
  for (const auto& sample : data) {
    Bindings b;
    b.emplace(model.input_node, sample.input);
    b.emplace(model.target_node, sample.target);
    Activations acts = forward(model.graph, params, b, model.loss_node);
    total += acts[model.loss_node].f32()[0];
  }
  return total / static_cast<double>(data.size());
}

std::string checkpoint_name(int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06" PRId64 ".t4ck", step);
  return buf;
}

}  // namespace

TrainResult train(const Model& model, ParamStore& params, std::span<const TrainSample> data,
                  const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  check(!data.empty(), "training dataset is empty");
  for (const auto& s : data) {
    check(s.input.shape() == model.graph.node(model.input_node).out_shape,
          "sample input shape " + s.input.shape().str() + " does not match model input " +
              model.graph.node(model.input_node).out_shape.str());
    check(s.target.shape() == model.graph.node(model.target_node).out_shape,
          "sample target shape mismatch");
  }

  AdamState adam(params);
  PlateauScheduler sched(cfg.lr, cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr,
                         cfg.plateau_threshold);
  std::vector<double> eval_tail;
  TrainResult result;

  if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

  auto emit_checkpoint = [&](int64_t step, const std::string& name) {
    if (opts.checkpoint_dir.empty()) return;
    size_t tail_from = eval_tail.size() > 8 ? eval_tail.size() - 8 : 0;
    std::span<const double> tail(eval_tail.data() + tail_from, eval_tail.size() - tail_from);
    Checkpoint c = make_checkpoint(model.graph, params, model.config, step, sched.lr(), tail);
    std::string path = opts.checkpoint_dir + "/" + name;
    save_checkpoint(c, path);
    result.checkpoint_paths.push_back(path);
  };

  ParamStore batch_grads;  // accumulated over the batch when batch_size > 1
  if (cfg.batch_size > 1) {
    batch_grads.dtype = params.dtype;
    for (const auto& v : params.values) batch_grads.grads.emplace_back(v.shape(), v.dtype());
  }

  int64_t cursor = 0;  // round-robin sample index
  for (int64_t step = 1; step <= cfg.max_steps; ++step) {
    double step_loss = 0.0;
    if (cfg.batch_size == 1) {
      const TrainSample& sample = data[cursor % data.size()];
      cursor++;
      Bindings b;
      b.emplace(model.input_node, sample.input);
      b.emplace(model.target_node, sample.target);
      Activations acts = forward(model.graph, params, b);
      step_loss = acts[model.loss_node].f32()[0];
      backward(model.graph, acts, params, model.loss_node);
    } else {
      for (auto& g : batch_grads.grads)
        std::fill(g.raw(), g.raw() + g.byte_size(), std::byte{0});
      for (int bi = 0; bi < cfg.batch_size; ++bi) {
        const TrainSample& sample = data[cursor % data.size()];
        cursor++;
        Bindings b;
        b.emplace(model.input_node, sample.input);
        b.emplace(model.target_node, sample.target);
        Activations acts = forward(model.graph, params, b);
        step_loss += acts[model.loss_node].f32()[0];
        backward(model.graph, acts, params, model.loss_node);
        for (size_t s = 0; s < params.grads.size(); ++s) {
          auto acc = batch_grads.grads[s].f32();
          auto g = params.grads[s].f32();
          for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
      }
      step_loss /= cfg.batch_size;
      const float inv = 1.0f / static_cast<float>(cfg.batch_size);
      for (size_t s = 0; s < params.grads.size(); ++s) {
        auto acc = batch_grads.grads[s].f32();
        auto g = params.grads[s].f32();
        for (size_t i = 0; i < g.size(); ++i) g[i] = acc[i] * inv;
      }
    }

    AdamConfig ac;
    ac.lr = sched.lr();
    adam_step(params, adam, ac);

    if (opts.loss_log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%" PRId64 "\t%.9g\t%.9g\n", step, step_loss, sched.lr());
      (*opts.loss_log) << buf;
    }

    if (step % cfg.eval_interval == 0) {
      double eval_loss = eval_dataset(model, params, data);
      eval_tail.push_back(eval_loss);
      sched.observe(eval_loss);
      emit_checkpoint(step, checkpoint_name(step));
    }
  }

  result.steps = cfg.max_steps;
  result.final_eval_loss = eval_dataset(model, params, data);
  if (cfg.max_steps % cfg.eval_interval != 0 || cfg.max_steps == 0)
    eval_tail.push_back(result.final_eval_loss);
  emit_checkpoint(cfg.max_steps, "ckpt_final.t4ck");
  return result;
}

}  // namespace t4c
