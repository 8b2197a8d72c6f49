#include "t4c/graph.hpp"

#include <algorithm>
#include <cmath>

#include "t4c/kernels.hpp"
#include "t4c/rng.hpp"

namespace t4c {

const Shape& Graph::shape_of(int id) const { return node(id).out_shape; }

const Node& Graph::node(int id) const {
  check(id >= 0 && id < size(), "node id out of range");
  return nodes_[id];
}

int Graph::push(Node n) {
  n.id = size();
  for (int in : n.inputs) check(in >= 0 && in < n.id, "node inputs must precede it");
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

int Graph::new_slot(std::string name, Shape shape, ParamKind kind, int fan_in) {
  for (const auto& p : params_) check(p.name != name, "duplicate parameter name: " + name);
  params_.push_back({std::move(name), std::move(shape), kind, fan_in});
  return static_cast<int>(params_.size()) - 1;
}

void Graph::zero_init_param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) {
      check(p.kind == ParamKind::weight, "only weights can be zero-initialized");
      p.kind = ParamKind::zero_weight;
      return;
    }
  fail("no parameter named '" + name + "'");
}

int Graph::input(Shape shape, std::string label) {
  shape.count();  // validate
  Node n;
  n.op = Op::input;
  n.out_shape = std::move(shape);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::param(Shape shape, const std::string& name) {
  shape.count();
  Node n;
  n.op = Op::param;
  n.out_shape = shape;
  n.label = name;
  n.param_slot = new_slot(name, std::move(shape), ParamKind::leaf, 0);
  return push(std::move(n));
}

int Graph::conv2d(int x, int out_channels, int kh, int kw, int stride, const std::string& name,
                  std::string label) {
  const Shape& in = shape_of(x);
  check(in.rank() == 3, "conv2d input must be [H,W,C]");
  check(stride == 1 || stride == 2, "conv2d stride must be 1 or 2");
  check(kh >= 1 && kw >= 1 && out_channels >= 1, "conv2d spec invalid");
  check(stride == 2 || (kh % 2 == 1 && kw % 2 == 1), "stride-1 SAME conv needs odd kernel extents");
  Node n;
  n.op = Op::conv2d;
  n.inputs = {x};
  n.kh = kh;
  n.kw = kw;
  n.stride = stride;
  n.out_shape = Shape{kernels::ceil_out(in[0], stride), kernels::ceil_out(in[1], stride), out_channels};
  n.weight_slot = new_slot(name + "/w", Shape{kh, kw, in[2], out_channels}, ParamKind::weight,
                           kh * kw * in[2]);
  n.bias_slot = new_slot(name + "/b", Shape{out_channels}, ParamKind::bias, 0);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::deconv2(int x, int out_channels, int target_h, int target_w, const std::string& name,
                   std::string label) {
  const Shape& in = shape_of(x);
  check(in.rank() == 3, "deconv2 input must be [H,W,C]");
  check(kernels::ceil_out(target_h, 2) == in[0] && kernels::ceil_out(target_w, 2) == in[1],
        "deconv2 target " + Shape{target_h, target_w}.str() + " incompatible with input " +
            in.str() + " under the ceil rule");
  Node n;
  n.op = Op::deconv2;
  n.inputs = {x};
  n.kh = 3;
  n.kw = 3;
  n.stride = 2;
  n.target_h = target_h;
  n.target_w = target_w;
  n.out_shape = Shape{target_h, target_w, out_channels};
  n.weight_slot = new_slot(name + "/w", Shape{3, 3, in[2], out_channels}, ParamKind::weight,
                           3 * 3 * in[2]);
  n.bias_slot = new_slot(name + "/b", Shape{out_channels}, ParamKind::bias, 0);
  n.label = std::move(label);
  return push(std::move(n));
}

namespace {
Node pool_node(Op op, const Shape& in, int x, int kh, int kw, int stride) {
  check(in.rank() == 3, "pooling input must be [H,W,C]");
  Node n;
  n.op = op;
  n.inputs = {x};
  n.kh = kh;
  n.kw = kw;
  n.stride = stride;
  n.out_shape = Shape{kernels::ceil_out(in[0], stride), kernels::ceil_out(in[1], stride), in[2]};
  return n;
}
}  // namespace

int Graph::avg_pool2(int x, std::string label) {
  Node n = pool_node(Op::avg_pool2, shape_of(x), x, 2, 2, 2);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::max_pool2(int x, std::string label) {
  Node n = pool_node(Op::max_pool2, shape_of(x), x, 2, 2, 2);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::max_filter3(int x, std::string label) {
  Node n = pool_node(Op::max_filter3, shape_of(x), x, 3, 3, 1);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::upsample_linear(int x, int target_h, int target_w, std::string label) {
  const Shape& in = shape_of(x);
  check(in.rank() == 3, "upsample input must be [H,W,C]");
  check(target_h >= in[0] && target_w >= in[1],
        "upsample target must not shrink: " + in.str() + " -> " +
            Shape{target_h, target_w}.str());
  Node n;
  n.op = Op::upsample_linear;
  n.inputs = {x};
  n.target_h = target_h;
  n.target_w = target_w;
  n.out_shape = Shape{target_h, target_w, in[2]};
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::relu(int x, std::string label) {
  Node n;
  n.op = Op::relu;
  n.inputs = {x};
  n.out_shape = shape_of(x);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::concat(const std::vector<int>& xs, std::string label) {
  check(!xs.empty(), "concat needs at least one input");
  const Shape& first = shape_of(xs[0]);
  check(first.rank() == 3, "concat inputs must be [H,W,C]");
  int channels = 0;
  for (int x : xs) {
    const Shape& s = shape_of(x);
    check(s.rank() == 3 && s[0] == first[0] && s[1] == first[1],
          "concat spatial mismatch: " + s.str() + " vs " + first.str());
    channels += s[2];
  }
  Node n;
  n.op = Op::concat;
  n.inputs = xs;
  n.out_shape = Shape{first[0], first[1], channels};
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::add(int a, int b, std::string label) {
  check(shape_of(a) == shape_of(b), "add shape mismatch");
  Node n;
  n.op = Op::add;
  n.inputs = {a, b};
  n.out_shape = shape_of(a);
  n.label = std::move(label);
  return push(std::move(n));
}

int Graph::mse(int pred, int target, std::string label) {
  check(shape_of(pred) == shape_of(target),
        "mse shape mismatch: " + shape_of(pred).str() + " vs " + shape_of(target).str());
  Node n;
  n.op = Op::mse;
  n.inputs = {pred, target};
  n.out_shape = Shape{1};
  n.label = std::move(label);
  return push(std::move(n));
}

ParamStore::ParamStore(const Graph& g, DType dt) : dtype(dt) {
  check(dt == DType::f32 || dt == DType::f64, "params must be float");
  for (const auto& p : g.params()) {
    values.emplace_back(p.shape, dt);
    grads.emplace_back(p.shape, dt);
  }
}

void ParamStore::zero_grads() {
  for (auto& g : grads) std::fill(g.raw(), g.raw() + g.byte_size(), std::byte{0});
}

int64_t ParamStore::total_count() const {
  int64_t n = 0;
  for (const auto& v : values) n += v.count();
  return n;
}

void init_params(const Graph& g, ParamStore& store, uint64_t seed) {
  check(store.values.size() == g.params().size(), "store does not match graph layout");
  Rng rng(seed);
  for (size_t i = 0; i < g.params().size(); ++i) {
    const ParamInfo& info = g.params()[i];
    Tensor& v = store.values[i];
    double sigma = 0.0;
    switch (info.kind) {
      case ParamKind::weight: sigma = std::sqrt(2.0 / info.fan_in); break;
      case ParamKind::bias: sigma = 0.0; break;
      case ParamKind::leaf: sigma = 1.0; break;
      case ParamKind::zero_weight: sigma = 0.0; break;
    }
    if (store.dtype == DType::f32) {
      auto s = v.f32();
      for (auto& e : s) e = static_cast<float>(sigma * rng.normal());
    } else {
      auto s = v.f64();
      for (auto& e : s) e = sigma * rng.normal();
    }
  }
}

ParamStore store_to_f64(const ParamStore& s) {
  ParamStore out;
  out.dtype = DType::f64;
  for (const auto& v : s.values) out.values.push_back(to_f64(v));
  for (const auto& gr : s.grads) out.grads.emplace_back(gr.shape(), DType::f64);
  return out;
}

namespace {

template <typename T>
std::span<const T> data_of(const Tensor& t);
template <>
std::span<const float> data_of<float>(const Tensor& t) { return t.f32(); }
template <>
std::span<const double> data_of<double>(const Tensor& t) { return t.f64(); }

template <typename T>
std::span<T> data_of(Tensor& t);
template <>
std::span<float> data_of<float>(Tensor& t) { return t.f32(); }
template <>
std::span<double> data_of<double>(Tensor& t) { return t.f64(); }

kernels::ConvDims conv_dims(const Node& n, const Shape& in) {
  return {in[0], in[1], in[2], n.out_shape[2], n.kh, n.kw, n.stride};
}

kernels::DeconvDims deconv_dims(const Node& n, const Shape& in) {
  return {in[0], in[1], in[2], n.out_shape[2], n.kh, n.kw, n.target_h, n.target_w};
}

kernels::PoolDims pool_dims(const Node& n, const Shape& in) {
  return {in[0], in[1], in[2], n.kh, n.kw, n.stride};
}

template <typename T>
void eval_node(const Node& n, const ParamStore& params, Activations& acts) {
  auto in = [&](int i) -> const Tensor& { return acts[n.inputs[i]]; };
  Tensor out(n.out_shape, in(0).dtype());
  switch (n.op) {
    case Op::conv2d: {
      kernels::conv2d_fwd<T>(data_of<T>(in(0)).data(), data_of<T>(params.values[n.weight_slot]).data(),
                             data_of<T>(params.values[n.bias_slot]).data(), data_of<T>(out).data(),
                             conv_dims(n, in(0).shape()));
      break;
    }
    case Op::deconv2: {
      kernels::deconv2_fwd<T>(data_of<T>(in(0)).data(), data_of<T>(params.values[n.weight_slot]).data(),
                              data_of<T>(params.values[n.bias_slot]).data(), data_of<T>(out).data(),
                              deconv_dims(n, in(0).shape()));
      break;
    }
    case Op::avg_pool2:
      kernels::pool_fwd<T>(kernels::PoolKind::avg, data_of<T>(in(0)).data(), data_of<T>(out).data(),
                           pool_dims(n, in(0).shape()));
      break;
    case Op::max_pool2:
    case Op::max_filter3:
      kernels::pool_fwd<T>(kernels::PoolKind::max, data_of<T>(in(0)).data(), data_of<T>(out).data(),
                           pool_dims(n, in(0).shape()));
      break;
    case Op::upsample_linear: {
      const Shape& s = in(0).shape();
      kernels::upsample_linear_fwd<T>(data_of<T>(in(0)).data(), data_of<T>(out).data(),
                                      {s[0], s[1], s[2], n.target_h, n.target_w});
      break;
    }
    case Op::relu:
      kernels::relu_fwd<T>(data_of<T>(in(0)).data(), data_of<T>(out).data(), in(0).count());
      break;
    case Op::concat: {
      const int h = n.out_shape[0], w = n.out_shape[1], ctot = n.out_shape[2];
      std::span<T> o = data_of<T>(out);
      int coff = 0;
      for (int xi : n.inputs) {
        const Tensor& t = acts[xi];
        const int ci = t.shape()[2];
        std::span<const T> src = data_of<T>(t);
        for (int64_t px = 0; px < int64_t{h} * w; ++px)
          std::copy_n(src.data() + px * ci, ci, o.data() + px * ctot + coff);
        coff += ci;
      }
      break;
    }
    case Op::add: {
      std::span<const T> a = data_of<T>(in(0)), b = data_of<T>(in(1));
      std::span<T> o = data_of<T>(out);
      for (int64_t i = 0; i < out.count(); ++i) o[i] = a[i] + b[i];
      break;
    }
    case Op::mse: {
      double v = kernels::mse_fwd<T>(data_of<T>(in(0)).data(), data_of<T>(in(1)).data(), in(0).count());
      data_of<T>(out)[0] = static_cast<T>(v);
      break;
    }
    case Op::input:
    case Op::param:
      fail("leaf nodes are not evaluated");
  }
  acts[n.id] = std::move(out);
}

template <typename T>
void backprop_node(const Node& n, const Graph& g, const Activations& acts, ParamStore& params,
                   std::vector<Tensor>& adj) {
  const Tensor& out_adj = adj[n.id];
  auto ensure_adj = [&](int id) -> Tensor& {
    if (!adj[id].defined()) adj[id] = Tensor(acts[id].shape(), acts[id].dtype());
    return adj[id];
  };
  auto in = [&](int i) -> const Tensor& { return acts[n.inputs[i]]; };
  // Input leaves never feed parameters, so their adjoints are dead ends.
  auto wants_grad = [&](int id) { return g.node(id).op != Op::input; };

  switch (n.op) {
    case Op::param: {
      std::span<T> dst = data_of<T>(params.grads[n.param_slot]);
      std::span<const T> src = data_of<T>(out_adj);
      for (int64_t i = 0; i < static_cast<int64_t>(dst.size()); ++i) dst[i] += src[i];
      break;
    }
    case Op::conv2d: {
      auto dims = conv_dims(n, in(0).shape());
      kernels::conv2d_bwd_param<T>(data_of<T>(in(0)).data(), data_of<T>(out_adj).data(),
                                   data_of<T>(params.grads[n.weight_slot]).data(),
                                   data_of<T>(params.grads[n.bias_slot]).data(), dims);
      if (wants_grad(n.inputs[0]))
        kernels::conv2d_bwd_data<T>(data_of<T>(out_adj).data(),
                                    data_of<T>(params.values[n.weight_slot]).data(),
                                    data_of<T>(ensure_adj(n.inputs[0])).data(), dims);
      break;
    }
    case Op::deconv2: {
      auto dims = deconv_dims(n, in(0).shape());
      kernels::deconv2_bwd_param<T>(data_of<T>(in(0)).data(), data_of<T>(out_adj).data(),
                                    data_of<T>(params.grads[n.weight_slot]).data(),
                                    data_of<T>(params.grads[n.bias_slot]).data(), dims);
      if (wants_grad(n.inputs[0]))
        kernels::deconv2_bwd_data<T>(data_of<T>(out_adj).data(),
                                     data_of<T>(params.values[n.weight_slot]).data(),
                                     data_of<T>(ensure_adj(n.inputs[0])).data(), dims);
      break;
    }
    case Op::avg_pool2:
      if (wants_grad(n.inputs[0]))
        kernels::pool_bwd<T>(kernels::PoolKind::avg, data_of<T>(in(0)).data(),
                             data_of<T>(out_adj).data(), data_of<T>(ensure_adj(n.inputs[0])).data(),
                             pool_dims(n, in(0).shape()));
      break;
    case Op::max_pool2:
    case Op::max_filter3:
      if (wants_grad(n.inputs[0]))
        kernels::pool_bwd<T>(kernels::PoolKind::max, data_of<T>(in(0)).data(),
                             data_of<T>(out_adj).data(), data_of<T>(ensure_adj(n.inputs[0])).data(),
                             pool_dims(n, in(0).shape()));
      break;
    case Op::upsample_linear: {
      if (wants_grad(n.inputs[0])) {
        const Shape& s = in(0).shape();
        kernels::upsample_linear_bwd<T>(data_of<T>(out_adj).data(),
                                        data_of<T>(ensure_adj(n.inputs[0])).data(),
                                        {s[0], s[1], s[2], n.target_h, n.target_w});
      }
      break;
    }
    case Op::relu:
      if (wants_grad(n.inputs[0]))
        kernels::relu_bwd<T>(data_of<T>(in(0)).data(), data_of<T>(out_adj).data(),
                             data_of<T>(ensure_adj(n.inputs[0])).data(), in(0).count());
      break;
    case Op::concat: {
      const int h = n.out_shape[0], w = n.out_shape[1], ctot = n.out_shape[2];
      std::span<const T> src = data_of<T>(out_adj);
      int coff = 0;
      for (int xi : n.inputs) {
        const int ci = acts[xi].shape()[2];
        if (wants_grad(xi)) {
          std::span<T> dst = data_of<T>(ensure_adj(xi));
          for (int64_t px = 0; px < int64_t{h} * w; ++px) {
            const T* s = src.data() + px * ctot + coff;
            T* o = dst.data() + px * ci;
            for (int c = 0; c < ci; ++c) o[c] += s[c];
          }
        }
        coff += ci;
      }
      break;
    }
    case Op::add: {
      std::span<const T> src = data_of<T>(out_adj);
      for (int side = 0; side < 2; ++side) {
        if (!wants_grad(n.inputs[side])) continue;
        std::span<T> dst = data_of<T>(ensure_adj(n.inputs[side]));
        for (int64_t i = 0; i < static_cast<int64_t>(src.size()); ++i) dst[i] += src[i];
      }
      break;
    }
    case Op::mse: {
      double upstream = static_cast<double>(data_of<T>(out_adj)[0]);
      T* da = wants_grad(n.inputs[0]) ? data_of<T>(ensure_adj(n.inputs[0])).data() : nullptr;
      T* db = wants_grad(n.inputs[1]) ? data_of<T>(ensure_adj(n.inputs[1])).data() : nullptr;
      if (da)
        kernels::mse_bwd<T>(data_of<T>(in(0)).data(), data_of<T>(in(1)).data(), upstream, da, db,
                            in(0).count());
      else if (db) {
        // Only the target side is differentiable; negate via a temp.
        Tensor tmp(in(0).shape(), in(0).dtype());
        kernels::mse_bwd<T>(data_of<T>(in(0)).data(), data_of<T>(in(1)).data(), upstream,
                            data_of<T>(tmp).data(), db, in(0).count());
      }
      break;
    }
    case Op::input:
      break;
  }
}

}  // namespace

Activations forward(const Graph& g, const ParamStore& params, const Bindings& inputs, int last) {
  if (last < 0) last = g.size() - 1;
  check(last < g.size(), "forward: node id out of range");
  check(params.values.size() == g.params().size(), "forward: param store layout mismatch");
  Activations acts(g.size());
  DType dt = params.dtype;
  for (int id = 0; id <= last; ++id) {
    const Node& n = g.node(id);
    switch (n.op) {
      case Op::input: {
        auto it = inputs.find(id);
        check(it != inputs.end(), "forward: unbound input node " + std::to_string(id) +
                                      (n.label.empty() ? "" : " (" + n.label + ")"));
        check(it->second.shape() == n.out_shape,
              "forward: input shape " + it->second.shape().str() + " does not match declared " +
                  n.out_shape.str());
        check(it->second.dtype() == dt, "forward: input dtype does not match params");
        acts[id] = it->second;
        break;
      }
      case Op::param:
        acts[id] = params.values[n.param_slot];
        break;
      default:
        if (dt == DType::f32)
          eval_node<float>(n, params, acts);
        else
          eval_node<double>(n, params, acts);
    }
  }
  return acts;
}

void backward(const Graph& g, const Activations& acts, ParamStore& params, int loss_node) {
  const Node& loss = g.node(loss_node);
  check(loss.out_shape.count() == 1, "backward: loss node must be scalar");
  check(static_cast<size_t>(g.size()) == acts.size() && acts[loss_node].defined(),
        "backward: forward must run first");
  params.zero_grads();
  std::vector<Tensor> adj(g.size());
  adj[loss_node] = Tensor::full(loss.out_shape, params.dtype, 1.0);
  for (int id = loss_node; id >= 0; --id) {
    if (!adj[id].defined()) continue;  // node does not feed the loss
    const Node& n = g.node(id);
    if (params.dtype == DType::f32)
      backprop_node<float>(n, g, acts, params, adj);
    else
      backprop_node<double>(n, g, acts, params, adj);
    adj[id] = Tensor();  // release as soon as consumed
  }
}

double relative_gap(double analytic, double numeric) {
  double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
  return std::fabs(analytic - numeric) / denom;
}

double grad_check(const Graph& g, const ParamStore& params, const Bindings& inputs, int loss_node,
                  double eps, uint64_t seed, int max_probes) {
  ParamStore p64 = store_to_f64(params);
  Bindings b64;
  for (const auto& [id, t] : inputs) b64.emplace(id, to_f64(t));

  Activations acts = forward(g, p64, b64, loss_node);
  backward(g, acts, p64, loss_node);

  auto loss_at = [&]() {
    Activations a = forward(g, p64, b64, loss_node);
    return a[loss_node].f64()[0];
  };

  Rng rng(seed);
  double worst = 0.0;
  for (size_t slot = 0; slot < p64.values.size(); ++slot) {
    Tensor& v = p64.values[slot];
    const Tensor& gr = p64.grads[slot];
    int64_t n = v.count();
    std::vector<int64_t> picks;
    if (n <= max_probes) {
      picks.resize(n);
      for (int64_t i = 0; i < n; ++i) picks[i] = i;
    } else {
      for (int i = 0; i < max_probes; ++i) picks.push_back(rng.uniform_int(static_cast<int>(n)));
    }
    for (int64_t idx : picks) {
      double saved = v.f64()[idx];
      v.f64()[idx] = saved + eps;
      double up = loss_at();
      v.f64()[idx] = saved - eps;
      double down = loss_at();
      v.f64()[idx] = saved;
      double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, relative_gap(gr.f64()[idx], numeric));
    }
  }
  return worst;
}

}  // namespace t4c
