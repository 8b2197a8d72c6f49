#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "t4c/tensor.hpp"

namespace t4c {

// Static computation graph over [H,W,C] activations. Nodes are appended in
// topological order (every input id refers to an earlier node); forward walks
// ids upward, backward walks them downward, so both are deterministic.
enum class Op : uint8_t {
  input,            // bound at forward time
  param,            // leaf whose value comes from a parameter slot
  conv2d,           // SAME-ceil cross-correlation, stride 1 or 2
  deconv2,          // stride-2 transposed conv to an explicit (H,W) target
  avg_pool2,        // 2x2 stride-2 ceil-mode, in-bounds-only mean
  max_pool2,        // 2x2 stride-2 ceil-mode, in-bounds-only max
  max_filter3,      // 3x3 stride-1 SAME max filter
  upsample_linear,  // bilinear to an explicit (H,W) target
  relu,
  concat,           // channel concatenation of N same-resolution inputs
  add,              // elementwise sum of two same-shape inputs
  mse,              // scalar mean squared error of inputs[0] vs inputs[1]
};

struct Node {
  int id = -1;
  Op op = Op::input;
  std::vector<int> inputs;
  Shape out_shape;
  std::string label;

  // conv2d / deconv2
  int kh = 0, kw = 0, stride = 1;
  int weight_slot = -1, bias_slot = -1;
  // deconv2 / upsample_linear
  int target_h = 0, target_w = 0;
  // param leaf
  int param_slot = -1;
};

enum class ParamKind : uint8_t { weight, bias, leaf, zero_weight };

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamKind kind = ParamKind::weight;
  int fan_in = 0;  // for weight init
};

class Graph {
 public:
  int input(Shape shape, std::string label = "input");
  // Leaf read from a parameter slot; used when an op's own input must be
  // differentiable (gradient checking) rather than bound externally.
  int param(Shape shape, const std::string& name);

  int conv2d(int x, int out_channels, int kh, int kw, int stride, const std::string& name,
             std::string label = {});
  int deconv2(int x, int out_channels, int target_h, int target_w, const std::string& name,
              std::string label = {});
  int avg_pool2(int x, std::string label = {});
  int max_pool2(int x, std::string label = {});
  int max_filter3(int x, std::string label = {});
  int upsample_linear(int x, int target_h, int target_w, std::string label = {});
  int relu(int x, std::string label = {});
  int concat(const std::vector<int>& xs, std::string label = {});
  int add(int a, int b, std::string label = {});
  int mse(int pred, int target, std::string label = {});

  const Node& node(int id) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<ParamInfo>& params() const { return params_; }

  // Marks a weight slot for zero initialization (regression heads start as
  // the zero predictor).
  void zero_init_param(const std::string& name);

 private:
  int push(Node n);
  int new_slot(std::string name, Shape shape, ParamKind kind, int fan_in);
  const Shape& shape_of(int id) const;

  std::vector<Node> nodes_;
  std::vector<ParamInfo> params_;
};

// Parameter values and their gradient accumulators, aligned with
// Graph::params() slots. Values may be shared read-only across workers;
// gradients belong to one backward pass at a time.
struct ParamStore {
  ParamStore() = default;
  ParamStore(const Graph& g, DType dtype);  // zero-filled

  DType dtype = DType::f32;
  std::vector<Tensor> values;
  std::vector<Tensor> grads;

  void zero_grads();
  int64_t total_count() const;
};

// Kaiming fan-in normal for weights, zeros for biases, unit normal for leaves.
void init_params(const Graph& g, ParamStore& store, uint64_t seed);

ParamStore store_to_f64(const ParamStore& s);

using Bindings = std::unordered_map<int, Tensor>;
using Activations = std::vector<Tensor>;

// Computes activations for nodes 0..last (default: all). Inputs must be
// bound with matching shapes; params must match the activation dtype.
Activations forward(const Graph& g, const ParamStore& params, const Bindings& inputs,
                    int last = -1);

// Accumulates d(loss)/d(param) into params.grads (zeroed first). The loss
// node must be scalar; fan-out adjoints are summed.
void backward(const Graph& g, const Activations& acts, ParamStore& params, int loss_node);

// |a-n| / max(|a|,|n|,1e-12)
double relative_gap(double analytic, double numeric);

// Central-difference check of every parameter element (or a seeded subsample
// of max_probes per tensor) against the analytic gradient, run in f64.
// Returns the worst relative gap.
double grad_check(const Graph& g, const ParamStore& params, const Bindings& inputs,
                  int loss_node, double eps, uint64_t seed, int max_probes = 64);

}  // namespace t4c
