#include <doctest.h>

#include "t4c/rng.hpp"
#include "t4c/tensor.hpp"

using namespace t4c;

TEST_CASE("create fills every element") {
  Tensor z = Tensor::full(Shape{2, 2}, DType::f32, 0.0);
  for (float v : z.f32()) CHECK(v == 0.0f);

  Tensor big = Tensor::full(Shape{495, 436, 115}, DType::f32, 0.0);
  CHECK(big.count() == int64_t{495} * 436 * 115);

  Tensor one = Tensor::full(Shape{1}, DType::f32, 7.5);
  CHECK(one.f32()[0] == 7.5f);
}

TEST_CASE("create validates shape and u8 range") {
  CHECK_THROWS_AS(Tensor(Shape{0, 3}, DType::f32), Error);
  CHECK_THROWS_AS(Tensor(Shape{-1}, DType::f32), Error);
  CHECK_THROWS_AS(Tensor(Shape{1 << 20, 1 << 20, 1 << 20}, DType::u8), Error);  // overflow
  CHECK_THROWS_AS(Tensor::full(Shape{2}, DType::u8, 256.0), Error);
  CHECK_THROWS_AS(Tensor::full(Shape{2}, DType::u8, 0.5), Error);
  CHECK(Tensor::full(Shape{2}, DType::u8, 255.0).u8()[0] == 255);
}

TEST_CASE("row-major flat offsets by direct enumeration") {
  Shape s{5, 7, 3};
  int64_t expect = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j)
      for (int c = 0; c < 3; ++c) {
        int idx[3] = {i, j, c};
        CHECK(s.index(idx) == expect);
        CHECK(s.index(idx) == (int64_t{i} * 7 + j) * 3 + c);
        ++expect;
      }
}

TEST_CASE("reshape relabels without moving data") {
  Tensor t(Shape{4}, DType::f32);
  for (int i = 0; i < 4; ++i) t.f32()[i] = static_cast<float>(i + 1);
  Tensor m = reshape(t, Shape{2, 2});
  CHECK(m.get({0, 0}) == 1.0);
  CHECK(m.get({0, 1}) == 2.0);
  CHECK(m.get({1, 0}) == 3.0);
  CHECK(m.get({1, 1}) == 4.0);

  CHECK_THROWS_AS(reshape(Tensor(Shape{2, 3}, DType::f32), Shape{7}), Error);

  // Count-preserving relabel of a (H,W,48) buffer to (6,H,W,8) succeeds and
  // keeps the flat order; the semantic time-axis split is a different op.
  Tensor hw(Shape{5, 4, 48}, DType::f32);
  Rng rng(3);
  for (auto& v : hw.f32()) v = static_cast<float>(rng.uniform());
  Tensor relabeled = reshape(hw, Shape{6, 5, 4, 8});
  CHECK(relabeled.shape() == Shape{6, 5, 4, 8});
  CHECK(std::equal(hw.f32().begin(), hw.f32().end(), relabeled.f32().begin()));
}

TEST_CASE("reshape round trip is the identity") {
  Rng rng(7);
  Tensor t(Shape{3, 4, 5}, DType::f32);
  for (auto& v : t.f32()) v = static_cast<float>(rng.normal());
  Tensor back = reshape(reshape(t, Shape{60}), Shape{3, 4, 5});
  CHECK(bitwise_equal(t, back));
}

TEST_CASE("concat_channels stacks per pixel") {
  Tensor a = Tensor::full(Shape{2, 2, 1}, DType::f32, 1.0);
  Tensor b = Tensor::full(Shape{2, 2, 1}, DType::f32, 2.0);
  Tensor c = concat_channels(a, b);
  CHECK(c.shape() == Shape{2, 2, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(c.get({i, j, 0}) == 1.0);
      CHECK(c.get({i, j, 1}) == 2.0);
    }

  CHECK_THROWS_AS(concat_channels(a, Tensor(Shape{3, 2, 1}, DType::f32)), Error);
  CHECK_THROWS_AS(concat_channels(a, Tensor(Shape{2, 2, 1}, DType::f64)), Error);

  // Full-size channel arithmetic.
  Tensor dyn(Shape{9, 8, 108}, DType::f32), stat(Shape{9, 8, 7}, DType::f32);
  CHECK(concat_channels(dyn, stat).shape() == Shape{9, 8, 115});
}

TEST_CASE("concat_channels restricted to the first block equals a") {
  Rng rng(11);
  Tensor a(Shape{3, 5, 4}, DType::f32), b(Shape{3, 5, 2}, DType::f32);
  for (auto& v : a.f32()) v = static_cast<float>(rng.normal());
  for (auto& v : b.f32()) v = static_cast<float>(rng.normal());
  Tensor c = concat_channels(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j)
      for (int ch = 0; ch < 4; ++ch) CHECK(c.get({i, j, ch}) == a.get({i, j, ch}));
}

TEST_CASE("elementwise math") {
  Tensor a(Shape{2}, DType::f32), b(Shape{2}, DType::f32);
  a.f32()[0] = 1; a.f32()[1] = 2;
  b.f32()[0] = 3; b.f32()[1] = 4;
  Tensor s = add(a, b);
  CHECK(s.f32()[0] == 4.0f);
  CHECK(s.f32()[1] == 6.0f);

  Tensor t(Shape{2}, DType::f32);
  t.f32()[0] = 2; t.f32()[1] = 4;
  Tensor h = scale(t, 0.5);
  CHECK(h.f32()[0] == 1.0f);
  CHECK(h.f32()[1] == 2.0f);

  CHECK_THROWS_AS(mul(Tensor(Shape{2}, DType::u8), Tensor(Shape{2}, DType::u8)), Error);
  CHECK_THROWS_AS(add(a, Tensor(Shape{3}, DType::f32)), Error);
}

TEST_CASE("add of a zero tensor is the identity") {
  Rng rng(13);
  Tensor a(Shape{4, 3}, DType::f32);
  for (auto& v : a.f32()) v = static_cast<float>(rng.normal());
  Tensor z = Tensor::full(a.shape(), DType::f32, 0.0);
  CHECK(bitwise_equal(add(a, z), a));
}
