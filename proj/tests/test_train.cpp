#include <doctest.h>

#include <cstdint>
#include <filesystem>

#include "t4c/dataset.hpp"
#include "t4c/rng.hpp"
#include "t4c/train.hpp"

using namespace t4c;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "t4c_train_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

ModelConfig tiny_config(int model_type = 1) {
  ModelConfig cfg;
  cfg.model_type = model_type;
  cfg.input_h = 31;
  cfg.input_w = 28;
  cfg.input_c = 115;
  cfg.levels = 3;
  cfg.channels = {8, 12, 16};
  cfg.dense_layers = 2;
  cfg.growth = 4;
  return cfg;
}

std::vector<TrainSample> tiny_dataset(int n, bool use_static = true) {
  SynthDataset ds = synth_dataset(1, n, 31, 28);
  std::vector<TrainSample> samples;
  for (const auto& raw : ds.samples) {
    TrainSample s;
    s.input = assemble_input(raw.dynamic, ds.static_map, use_static);
    s.target = flatten_target(raw.target);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace

TEST_CASE("mse basics") {
  Tensor a = Tensor::full(Shape{2}, DType::f32, 1.0);
  Tensor b(Shape{2}, DType::f32);
  b.f32()[0] = 0.0f;
  b.f32()[1] = 2.0f;
  CHECK(mse(a, a) == 0.0f);
  CHECK(mse(a, b) == 1.0f);  // (1+1)/2
  CHECK_THROWS_AS(mse(a, Tensor(Shape{3}, DType::f32)), Error);
}

TEST_CASE("mse of uniform noise approaches 1/6") {
  Rng rng(77);
  const int64_t n = 1'000'000;
  Tensor a(Shape{1000, 1000}, DType::f32), b(Shape{1000, 1000}, DType::f32);
  for (int64_t i = 0; i < n; ++i) {
    a.f32()[i] = static_cast<float>(rng.uniform());
    b.f32()[i] = static_cast<float>(rng.uniform());
  }
  CHECK(mse(a, b) == doctest::Approx(1.0 / 6.0).epsilon(0.06));  // tol 0.01 absolute
  CHECK(std::fabs(mse(a, b) - 1.0 / 6.0) < 0.01);
}

TEST_CASE("mse symmetry and shift invariance") {
  Rng rng(5);
  Tensor a(Shape{7, 3}, DType::f32), b(Shape{7, 3}, DType::f32);
  for (auto& v : a.f32()) v = static_cast<float>(rng.normal());
  for (auto& v : b.f32()) v = static_cast<float>(rng.normal());
  CHECK(mse(a, b) == mse(b, a));
  Tensor c = Tensor::full(a.shape(), DType::f32, 0.75);
  CHECK(mse(add(a, c), add(b, c)) == doctest::Approx(mse(a, b)).epsilon(1e-5));
}

namespace {

// One-parameter store for optimizer tests.
struct OneParam {
  Graph g;
  ParamStore store;
  OneParam(float value, float grad) {
    g.param(Shape{1}, "w");
    store = ParamStore(g, DType::f32);
    store.values[0].f32()[0] = value;
    store.grads[0].f32()[0] = grad;
  }
};

}  // namespace

TEST_CASE("adam first step displacement matches the closed form") {
  OneParam p(0.0f, 1.0f);
  AdamState st(p.store);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  adam_step(p.store, st, cfg);
  // m^ = v^ = 1 exactly on the first step, so dp = -lr / (1 + eps).
  double expect = -cfg.lr / (1.0 + cfg.eps);
  CHECK(p.store.values[0].f32()[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK(st.t == 1);
}

TEST_CASE("adam with zero gradients is a no-op") {
  OneParam p(0.5f, 0.0f);
  AdamState st(p.store);
  adam_step(p.store, st, {});
  adam_step(p.store, st, {});
  CHECK(p.store.values[0].f32()[0] == 0.5f);
}

TEST_CASE("adam decreases the parameter monotonically under constant positive gradient") {
  OneParam p(1.0f, 1.0f);
  AdamState st(p.store);
  float prev = 1.0f;
  for (int i = 0; i < 5; ++i) {
    p.store.grads[0].f32()[0] = 1.0f;
    adam_step(p.store, st, {});
    float cur = p.store.values[0].f32()[0];
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("adam displacement is exactly lr-covariant on the first step") {
  OneParam a(0.0f, 0.37f), b(0.0f, 0.37f);
  AdamState sa(a.store), sb(b.store);
  AdamConfig ca, cb;
  ca.lr = 1e-3;
  cb.lr = 2e-3;
  adam_step(a.store, sa, ca);
  adam_step(b.store, sb, cb);
  CHECK(b.store.values[0].f32()[0] == 2.0f * a.store.values[0].f32()[0]);
}

TEST_CASE("plateau schedule walkthrough") {
  // P=3, flat history: reduction lands after the 4th observation.
  PlateauScheduler s(1.0, 3, 0.5, 1e-6, 1e-3);
  CHECK(s.observe(1.0) == 1.0);
  CHECK(s.observe(1.0) == 1.0);
  CHECK(s.observe(1.0) == 1.0);
  CHECK(s.observe(1.0) == 0.5);

  // strictly decreasing history: unchanged
  PlateauScheduler d(1.0, 3, 0.5, 1e-6, 1e-3);
  double lr = 1.0;
  for (double loss : {1.0, 0.5, 0.25, 0.125, 0.0625}) lr = d.observe(loss);
  CHECK(lr == 1.0);

  // clamps at min_lr and never rises
  PlateauScheduler c(1e-6, 1, 0.5, 1e-6, 1e-3);
  for (int i = 0; i < 10; ++i) {
    double next = c.observe(1.0);
    CHECK(next >= 1e-6);
    CHECK(next <= 1e-6);
  }
}

TEST_CASE("plateau lr never increases on random histories") {
  Rng rng(15);
  PlateauScheduler s(0.3, 2, 0.5, 1e-5, 1e-3);
  double prev = 0.3;
  for (int i = 0; i < 200; ++i) {
    double lr = s.observe(rng.uniform());
    CHECK(lr <= prev);
    CHECK(lr >= 1e-5);
    prev = lr;
  }
}

TEST_CASE("checkpoint of a model round-trips bit-exactly") {
  ModelConfig cfg = tiny_config();
  Model m = build_model(cfg);
  ParamStore params(m.graph, DType::f32);
  init_params(m.graph, params, 5);
  double tail[2] = {0.5, 0.25};
  Checkpoint c = make_checkpoint(m.graph, params, cfg, 120, 3e-4, tail);
  std::string path = tmp_dir("ckpt") + "/model.t4ck";
  save_checkpoint(c, path);
  Checkpoint back = load_checkpoint(path);

  ModelConfig cfg2 = checkpoint_model_config(back);
  CHECK(cfg2 == cfg);
  CHECK(back.metadata == c.metadata);
  REQUIRE(back.tensors.size() == c.tensors.size());
  for (size_t i = 0; i < c.tensors.size(); ++i)
    CHECK(bitwise_equal(back.tensors[i].second, c.tensors[i].second));

  Model m2 = build_model(cfg2);
  ParamStore loaded(m2.graph, DType::f32);
  load_params(back, m2.graph, loaded);
  for (size_t i = 0; i < params.values.size(); ++i)
    CHECK(bitwise_equal(loaded.values[i], params.values[i]));
}

TEST_CASE("max_steps=0 checkpoint equals initialization") {
  ModelConfig cfg = tiny_config();
  Model m = build_model(cfg);
  ParamStore params(m.graph, DType::f32);
  init_params(m.graph, params, 9);
  std::vector<Tensor> before;
  for (const auto& v : params.values) before.push_back(v);

  auto data = tiny_dataset(2);
  TrainConfig tc;
  tc.max_steps = 0;
  TrainOptions opts;
  opts.checkpoint_dir = tmp_dir("zero");
  TrainResult res = train(m, params, data, tc, opts);
  CHECK(res.steps == 0);
  REQUIRE(res.checkpoint_paths.size() == 1);
  Checkpoint c = load_checkpoint(res.checkpoint_paths[0]);
  for (size_t i = 0; i < before.size(); ++i)
    CHECK(bitwise_equal(c.tensors[i].second, before[i]));
}

TEST_CASE("all-zero parameters give loss = mean(target^2)") {
  ModelConfig cfg = tiny_config();
  Model m = build_model(cfg);
  ParamStore params(m.graph, DType::f32);  // zeros everywhere
  auto data = tiny_dataset(1);
  Bindings b;
  b.emplace(m.input_node, data[0].input);
  b.emplace(m.target_node, data[0].target);
  Activations acts = forward(m.graph, params, b);
  double want = 0.0;
  for (float v : data[0].target.f32()) want += static_cast<double>(v) * v;
  want /= data[0].target.count();
  CHECK(acts[m.loss_node].f32()[0] == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("short training run decreases the loss and is deterministic") {
  auto data = tiny_dataset(2);
  ModelConfig cfg = tiny_config();

  auto run = [&](uint64_t seed) {
    Model m = build_model(cfg);
    ParamStore params(m.graph, DType::f32);
    init_params(m.graph, params, seed);
    TrainConfig tc;
    tc.max_steps = 60;
    tc.eval_interval = 30;
    tc.seed = seed;
    double loss0 = [&] {
      Bindings b;
      b.emplace(m.input_node, data[0].input);
      b.emplace(m.target_node, data[0].target);
      return forward(m.graph, params, b)[m.loss_node].f32()[0];
    }();
    TrainResult res = train(m, params, data, tc);
    return std::tuple{loss0, res.final_eval_loss, params.values};
  };

  auto [loss0_a, final_a, params_a] = run(1);
  auto [loss0_b, final_b, params_b] = run(1);
  CHECK(final_a < loss0_a);
  REQUIRE(params_a.size() == params_b.size());
  for (size_t i = 0; i < params_a.size(); ++i) CHECK(bitwise_equal(params_a[i], params_b[i]));
  CHECK(final_a == final_b);
}

TEST_CASE("one batch-2 step applies the mean of the per-sample gradients") {
  auto data = tiny_dataset(2);
  ModelConfig cfg = tiny_config();
  Model m = build_model(cfg);

  // reference: average the two per-sample gradients by hand, one adam step
  ParamStore ref(m.graph, DType::f32);
  init_params(m.graph, ref, 4);
  std::vector<Tensor> mean_grads;
  for (size_t s = 0; s < ref.values.size(); ++s)
    mean_grads.emplace_back(ref.values[s].shape(), DType::f32);
  for (int i = 0; i < 2; ++i) {
    Bindings b;
    b.emplace(m.input_node, data[i].input);
    b.emplace(m.target_node, data[i].target);
    Activations acts = forward(m.graph, ref, b);
    backward(m.graph, acts, ref, m.loss_node);
    for (size_t s = 0; s < ref.grads.size(); ++s)
      for (int64_t k = 0; k < ref.grads[s].count(); ++k)
        mean_grads[s].f32()[k] += 0.5f * ref.grads[s].f32()[k];
  }
  for (size_t s = 0; s < ref.grads.size(); ++s) ref.grads[s] = mean_grads[s];
  AdamState st(ref);
  AdamConfig ac;
  ac.lr = 3e-4;
  adam_step(ref, st, ac);

  // the training loop with batch_size=2 must land on the same parameters
  ParamStore looped(m.graph, DType::f32);
  init_params(m.graph, looped, 4);
  TrainConfig tc;
  tc.max_steps = 1;
  tc.batch_size = 2;
  tc.eval_interval = 100;
  train(m, looped, data, tc);

  for (size_t s = 0; s < ref.values.size(); ++s) CHECK(bitwise_equal(ref.values[s], looped.values[s]));
}
