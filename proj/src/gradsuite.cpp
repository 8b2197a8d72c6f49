#include "t4c/gradsuite.hpp"

#include <algorithm>

#include "t4c/layers.hpp"
#include "t4c/rng.hpp"

namespace t4c {

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape), DType::f64);
  for (auto& v : t.f64()) v = rng.normal();
  return t;
}

struct Case {
  Graph g;
  ParamStore store;
  Bindings inputs;
  int loss = -1;
};

// param leaf -> op subgraph -> mse against a random bound target.
Case build_case(const std::string& op, uint64_t seed) {
  Case c;
  Rng rng(seed);
  Graph& g = c.g;
  int head = -1;
  if (op == "conv2d") {
    int x = g.param(Shape{6, 5, 4}, "x");
    head = g.conv2d(x, 3, 3, 3, 1, "conv");
  } else if (op == "conv_pool2") {
    int x = g.param(Shape{7, 6, 3}, "x");
    head = g.conv2d(x, 4, 3, 3, 2, "conv");
  } else if (op == "avg_pool2") {
    int x = g.param(Shape{7, 5, 3}, "x");
    head = g.avg_pool2(x);
  } else if (op == "max_pool2") {
    int x = g.param(Shape{7, 5, 3}, "x");
    head = g.max_pool2(x);
  } else if (op == "max_filter3") {
    int x = g.param(Shape{5, 6, 3}, "x");
    head = g.max_filter3(x);
  } else if (op == "deconv2") {
    int x = g.param(Shape{4, 4, 3}, "x");
    head = g.deconv2(x, 2, 7, 8, "deconv");
  } else if (op == "upsample_linear") {
    int x = g.param(Shape{3, 4, 2}, "x");
    head = g.upsample_linear(x, 7, 6);
  } else if (op == "dense_block") {
    int x = g.param(Shape{5, 5, 3}, "x");
    head = dense_block(g, x, DenseBlockSpec{2, 3, 4}, "blk");
  } else if (op == "relu") {
    int x = g.param(Shape{5, 5, 3}, "x");
    head = g.relu(x);
  } else if (op == "mse") {
    head = g.param(Shape{4, 4, 2}, "x");
  } else if (op == "concat") {
    int a = g.param(Shape{3, 3, 2}, "a");
    int b = g.param(Shape{3, 3, 3}, "b");
    head = g.concat({a, b});
  } else if (op == "add") {
    int a = g.param(Shape{4, 3, 2}, "a");
    int b = g.param(Shape{4, 3, 2}, "b");
    head = g.add(a, b);
  } else {
    fail("unknown gradcheck op '" + op + "'");
  }
  const Shape out_shape = g.node(head).out_shape;  // copy: adding nodes reallocates
  int target = g.input(out_shape, "target");
  c.loss = g.mse(head, target);

  c.store = ParamStore(g, DType::f64);
  init_params(g, c.store, seed + 1);
  // Leaf inputs get a milder spread than unit normal so ReLU keeps a mix of
  // active and inactive units.
  for (size_t s = 0; s < g.params().size(); ++s)
    if (g.params()[s].kind == ParamKind::leaf)
      for (auto& v : c.store.values[s].f64()) v = 0.8 * rng.normal();
  c.inputs.emplace(target, random_tensor(out_shape, rng));
  return c;
}

}  // namespace

const std::vector<std::string>& grad_suite_ops() {
  static const std::vector<std::string> ops = {
      "conv2d", "conv_pool2", "avg_pool2", "max_pool2",  "max_filter3", "deconv2",
      "upsample_linear", "dense_block", "relu", "mse", "concat", "add",
  };
  return ops;
}

std::vector<GradCase> run_grad_suite(const std::string& op, uint64_t seed, double eps) {
  std::vector<std::string> selected;
  if (op == "all") {
    selected = grad_suite_ops();
  } else {
    const auto& ops = grad_suite_ops();
    check(std::find(ops.begin(), ops.end(), op) != ops.end(), "unknown gradcheck op '" + op + "'");
    selected = {op};
  }
  std::vector<GradCase> results;
  for (const std::string& name : selected) {
    Case c = build_case(name, seed);
    double err = grad_check(c.g, c.store, c.inputs, c.loss, eps, seed + 2);
    results.push_back({name, err});
  }
  return results;
}

}  // namespace t4c
