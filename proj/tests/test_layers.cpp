#include <doctest.h>

#include "oracle.hpp"
#include "t4c/gradsuite.hpp"
#include "t4c/layers.hpp"
#include "t4c/rng.hpp"

using namespace t4c;

namespace {

Tensor random_f32(Shape shape, uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape), DType::f32);
  for (auto& v : t.f32()) v = static_cast<float>(rng.normal());
  return t;
}

// Runs a single-op graph over one input tensor.
template <typename BuildFn>
Tensor run_op(const Tensor& input, BuildFn&& build) {
  Graph g;
  int x = g.input(input.shape());
  int y = build(g, x);
  ParamStore params(g, DType::f32);
  Bindings b;
  b.emplace(x, input);
  return forward(g, params, b)[y];
}

}  // namespace

TEST_CASE("conv2d matches the direct-summation oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    int h = 3 + rng.uniform_int(8), w = 3 + rng.uniform_int(8);
    int cin = 1 + rng.uniform_int(4), cout = 1 + rng.uniform_int(4);
    int stride = 1 + trial % 2;
    Graph g;
    int x = g.input(Shape{h, w, cin});
    int y = g.conv2d(x, cout, 3, 3, stride, "conv");
    ParamStore params(g, DType::f32);
    init_params(g, params, 100 + trial);
    Bindings b;
    b.emplace(x, random_f32(Shape{h, w, cin}, 200 + trial));
    Tensor got = forward(g, params, b)[y];
    Tensor want = oracle::conv2d(b.at(x), params.values[0], params.values[1], stride);
    REQUIRE(got.shape() == want.shape());
    for (int64_t i = 0; i < got.count(); ++i)
      CHECK(got.f32()[i] == doctest::Approx(want.f32()[i]).epsilon(1e-4));
  }
}

TEST_CASE("3x3 all-ones kernel sums the padded window") {
  // ones(3,3) input, ones kernel, zero bias: center 9, corners 4, edges 6.
  Graph g;
  int x = g.input(Shape{3, 3, 1});
  int y = g.conv2d(x, 1, 3, 3, 1, "conv");
  ParamStore params(g, DType::f32);
  for (auto& v : params.values[0].f32()) v = 1.0f;
  Bindings b;
  b.emplace(x, Tensor::full(Shape{3, 3, 1}, DType::f32, 1.0));
  Tensor out = forward(g, params, b)[y];
  CHECK(out.get({1, 1, 0}) == 9.0);
  CHECK(out.get({0, 0, 0}) == 4.0);
  CHECK(out.get({0, 2, 0}) == 4.0);
  CHECK(out.get({2, 0, 0}) == 4.0);
  CHECK(out.get({2, 2, 0}) == 4.0);
  CHECK(out.get({0, 1, 0}) == 6.0);
  CHECK(out.get({1, 0, 0}) == 6.0);
  CHECK(out.get({1, 2, 0}) == 6.0);
  CHECK(out.get({2, 1, 0}) == 6.0);
}

TEST_CASE("stride-2 1x1 conv samples rows and columns 0,2,4") {
  Graph g;
  int x = g.input(Shape{5, 5, 1});
  int y = g.conv2d(x, 1, 1, 1, 2, "conv");
  ParamStore params(g, DType::f32);
  params.values[0].f32()[0] = 1.0f;
  Tensor in(Shape{5, 5, 1}, DType::f32);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) in.set({i, j, 0}, 10.0 * i + j);
  Bindings b;
  b.emplace(x, in);
  Tensor out = forward(g, params, b)[y];
  REQUIRE(out.shape() == Shape{3, 3, 1});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(out.get({i, j, 0}) == 10.0 * (2 * i) + 2 * j);
}

TEST_CASE("conv_pool2 halves the full-size spatial schedule") {
  Graph g;
  int x = g.input(Shape{248, 218, 2});
  int y = g.conv2d(x, 3, 3, 3, 2, "conv");
  CHECK(g.node(y).out_shape == Shape{124, 109, 3});

  Graph g2;
  int x2 = g2.input(Shape{4, 4, 2});
  CHECK(g2.node(g2.conv2d(x2, 2, 3, 3, 2, "conv")).out_shape == Shape{2, 2, 2});
}

TEST_CASE("avg_pool2 hand case: 1..9 -> {3.0, 4.5, 7.5, 9.0}") {
  Tensor in(Shape{3, 3, 1}, DType::f32);
  for (int i = 0; i < 9; ++i) in.f32()[i] = static_cast<float>(i + 1);
  Tensor out = run_op(in, [](Graph& g, int x) { return g.avg_pool2(x); });
  REQUIRE(out.shape() == Shape{2, 2, 1});
  CHECK(out.get({0, 0, 0}) == 3.0);   // mean of 1,2,4,5
  CHECK(out.get({0, 1, 0}) == 4.5);   // mean of 3,6
  CHECK(out.get({1, 0, 0}) == 7.5);   // mean of 7,8
  CHECK(out.get({1, 1, 0}) == 9.0);   // lone corner
}

TEST_CASE("max_pool2 hand case: 1..9 -> {5, 6, 8, 9}") {
  Tensor in(Shape{3, 3, 1}, DType::f32);
  for (int i = 0; i < 9; ++i) in.f32()[i] = static_cast<float>(i + 1);
  Tensor out = run_op(in, [](Graph& g, int x) { return g.max_pool2(x); });
  CHECK(out.get({0, 0, 0}) == 5.0);
  CHECK(out.get({0, 1, 0}) == 6.0);
  CHECK(out.get({1, 0, 0}) == 8.0);
  CHECK(out.get({1, 1, 0}) == 9.0);
}

TEST_CASE("pooling of a constant stays constant; (8,7) -> (4,4)") {
  Tensor in = Tensor::full(Shape{8, 7, 3}, DType::f32, 2.5);
  Tensor avg = run_op(in, [](Graph& g, int x) { return g.avg_pool2(x); });
  Tensor mx = run_op(in, [](Graph& g, int x) { return g.max_pool2(x); });
  REQUIRE(avg.shape() == Shape{4, 4, 3});
  REQUIRE(mx.shape() == Shape{4, 4, 3});
  for (float v : avg.f32()) CHECK(v == 2.5f);
  for (float v : mx.f32()) CHECK(v == 2.5f);
}

TEST_CASE("pooling matches the window-enumeration oracle on random sizes") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    int h = 1 + rng.uniform_int(14), w = 1 + rng.uniform_int(14);
    Tensor in = random_f32(Shape{h, w, 2}, 300 + trial);
    Tensor avg = run_op(in, [](Graph& g, int x) { return g.avg_pool2(x); });
    Tensor mx = run_op(in, [](Graph& g, int x) { return g.max_pool2(x); });
    Tensor mf = run_op(in, [](Graph& g, int x) { return g.max_filter3(x); });
    Tensor oa = oracle::pool(in, 2, 2, 2, false);
    Tensor om = oracle::pool(in, 2, 2, 2, true);
    Tensor of = oracle::pool(in, 3, 3, 1, true);
    REQUIRE(avg.shape() == oa.shape());
    REQUIRE(mf.shape() == in.shape());
    for (int64_t i = 0; i < avg.count(); ++i)
      CHECK(avg.f32()[i] == doctest::Approx(oa.f32()[i]).epsilon(1e-5));
    for (int64_t i = 0; i < mx.count(); ++i) CHECK(mx.f32()[i] == om.f32()[i]);
    for (int64_t i = 0; i < mf.count(); ++i) CHECK(mf.f32()[i] == of.f32()[i]);
  }
}

TEST_CASE("avg_pool2 preserves the global mean on even extents; max >= avg") {
  Tensor in = random_f32(Shape{8, 6, 2}, 77);
  Tensor avg = run_op(in, [](Graph& g, int x) { return g.avg_pool2(x); });
  Tensor mx = run_op(in, [](Graph& g, int x) { return g.max_pool2(x); });
  double mean_in = 0, mean_out = 0;
  for (float v : in.f32()) mean_in += v;
  for (float v : avg.f32()) mean_out += v;
  CHECK(mean_in / in.count() == doctest::Approx(mean_out / avg.count()).epsilon(1e-5));
  for (int64_t i = 0; i < avg.count(); ++i) CHECK(mx.f32()[i] >= avg.f32()[i]);
}

TEST_CASE("deconv2 produces the requested target and round-trips pool shapes") {
  Graph g;
  int x = g.input(Shape{4, 4, 3});
  int y = g.deconv2(x, 3, 8, 7, "up");
  CHECK(g.node(y).out_shape == Shape{8, 7, 3});

  Graph g2;
  int x2 = g2.input(Shape{8, 7, 2});
  CHECK(g2.node(g2.deconv2(x2, 2, 16, 14, "up")).out_shape == Shape{16, 14, 2});

  Graph g3;
  int x3 = g3.input(Shape{4, 4, 1});
  CHECK_THROWS_WITH_AS(g3.deconv2(x3, 1, 9, 9, "up"), doctest::Contains("incompatible"), Error);

  // shape round trip through pool then deconv for every extent
  for (int h = 1; h <= 64; ++h)
    for (int w = 1; w <= 64; ++w) {
      Graph gg;
      int in = gg.input(Shape{h, w, 1});
      int pooled = gg.avg_pool2(in);
      const Shape ps = gg.node(pooled).out_shape;  // copy: adding nodes reallocates
      int up = gg.deconv2(pooled, 1, h, w, "up");
      CHECK(gg.node(up).out_shape == Shape{h, w, 1});
      CHECK(ps[0] == (h + 1) / 2);
      CHECK(ps[1] == (w + 1) / 2);
    }
}

TEST_CASE("deconv2 matches the scatter-form oracle") {
  struct Case {
    int h, w, cin, cout, out_h, out_w;
  };
  for (const Case& c : {Case{4, 4, 3, 2, 8, 7}, Case{8, 7, 2, 3, 16, 14}, Case{3, 3, 1, 1, 5, 6},
                        Case{1, 1, 2, 2, 2, 1}}) {
    Graph g;
    int x = g.input(Shape{c.h, c.w, c.cin});
    int y = g.deconv2(x, c.cout, c.out_h, c.out_w, "up");
    ParamStore params(g, DType::f32);
    init_params(g, params, 400 + c.h);
    for (auto& v : params.values[1].f32()) v = 0.25f;  // nonzero bias
    Bindings b;
    b.emplace(x, random_f32(Shape{c.h, c.w, c.cin}, 500 + c.h));
    Tensor got = forward(g, params, b)[y];
    Tensor want = oracle::deconv2(b.at(x), params.values[0], params.values[1], c.out_h, c.out_w);
    REQUIRE(got.shape() == want.shape());
    for (int64_t i = 0; i < got.count(); ++i)
      CHECK(got.f32()[i] == doctest::Approx(want.f32()[i]).epsilon(1e-4));
  }
}

TEST_CASE("upsample_linear keeps constants exact and matches the closed form") {
  Tensor c = Tensor::full(Shape{3, 5, 2}, DType::f32, 3.0);
  Tensor up = run_op(c, [](Graph& g, int x) { return g.upsample_linear(x, 9, 11); });
  for (float v : up.f32()) CHECK(v == 3.0f);

  // (1,2) {0,1} -> (1,4): {0, 0.25, 0.75, 1.0}
  Tensor in(Shape{1, 2, 1}, DType::f32);
  in.f32()[0] = 0.0f;
  in.f32()[1] = 1.0f;
  Tensor out = run_op(in, [](Graph& g, int x) { return g.upsample_linear(x, 1, 4); });
  CHECK(out.f32()[0] == 0.0f);
  CHECK(out.f32()[1] == doctest::Approx(0.25));
  CHECK(out.f32()[2] == doctest::Approx(0.75));
  CHECK(out.f32()[3] == 1.0f);

  Tensor r = random_f32(Shape{4, 4, 3}, 55);
  Tensor up2 = run_op(r, [](Graph& g, int x) { return g.upsample_linear(x, 8, 7); });
  REQUIRE(up2.shape() == Shape{8, 7, 3});
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 7; ++ox)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(up2.get({oy, ox, ch}) ==
              doctest::Approx(oracle::bilinear_at(r, oy, ox, ch, 8, 7)).epsilon(1e-5));

  Graph g;
  int x = g.input(Shape{5, 5, 1});
  CHECK_THROWS_WITH_AS(g.upsample_linear(x, 4, 5), doctest::Contains("shrink"), Error);
}

TEST_CASE("relu") {
  Tensor in(Shape{3}, DType::f32);
  in.f32()[0] = -1;
  in.f32()[1] = 0;
  in.f32()[2] = 2;
  Graph g;
  int x = g.input(Shape{3});
  // relu accepts any rank; run via rank-1 graph
  int y = g.relu(x);
  ParamStore params(g, DType::f32);
  Bindings b;
  b.emplace(x, in);
  Tensor out = forward(g, params, b)[y];
  CHECK(out.f32()[0] == 0.0f);
  CHECK(out.f32()[1] == 0.0f);
  CHECK(out.f32()[2] == 2.0f);

  Tensor pos = Tensor::full(Shape{4}, DType::f32, 1.5);
  Graph g2;
  int x2 = g2.input(Shape{4});
  int y2 = g2.relu(x2);
  ParamStore p2(g2, DType::f32);
  Bindings b2;
  b2.emplace(x2, pos);
  CHECK(bitwise_equal(forward(g2, p2, b2)[y2], pos));
}

TEST_CASE("dense block channel arithmetic and wiring") {
  // Cin=115, L=4, g=16, out=64: internal concats see 115,131,147,163; the
  // transition consumes 179.
  Graph g;
  int x = g.input(Shape{6, 5, 115});
  int y = dense_block(g, x, DenseBlockSpec{4, 16, 64}, "blk");
  CHECK(g.node(y).out_shape == Shape{6, 5, 64});
  std::vector<Shape> conv_w_shapes;
  for (const auto& p : g.params())
    if (p.kind == ParamKind::weight && p.shape.rank() == 4) conv_w_shapes.push_back(p.shape);
  REQUIRE(conv_w_shapes.size() == 5);
  CHECK(conv_w_shapes[0] == Shape{3, 3, 115, 16});
  CHECK(conv_w_shapes[1] == Shape{3, 3, 131, 16});
  CHECK(conv_w_shapes[2] == Shape{3, 3, 147, 16});
  CHECK(conv_w_shapes[3] == Shape{3, 3, 163, 16});
  CHECK(conv_w_shapes[4] == Shape{1, 1, 179, 64});
}

TEST_CASE("dense block with L=0 degenerates to one 1x1 conv") {
  Graph g;
  int x = g.input(Shape{4, 4, 5});
  int y = dense_block(g, x, DenseBlockSpec{0, 16, 3}, "blk");
  CHECK(g.node(y).out_shape == Shape{4, 4, 3});
  CHECK(g.params().size() == 2);  // transition w + b only
}

TEST_CASE("zeroed internals reduce the dense block to a 1x1 conv of the input") {
  Graph g;
  int x = g.input(Shape{5, 5, 3});
  int y = dense_block(g, x, DenseBlockSpec{2, 4, 3}, "blk");
  ParamStore params(g, DType::f32);  // all zeros
  // identity-like transition on the raw-input channels
  for (size_t s = 0; s < g.params().size(); ++s)
    if (g.params()[s].name == "blk/trans/w")
      for (int c = 0; c < 3; ++c) params.values[s].set({0, 0, c, c}, 1.0);
  Bindings b;
  Tensor in = random_f32(Shape{5, 5, 3}, 91);
  b.emplace(x, in);
  Tensor out = forward(g, params, b)[y];
  CHECK(bitwise_equal(out, in));
}

TEST_CASE("gradient suite: every layer op beats 1e-4 in f64") {
  for (const auto& r : run_grad_suite("all", 1, 1e-6)) {
    INFO(r.op);
    CHECK(r.max_rel_err < 1e-4);
  }
}
