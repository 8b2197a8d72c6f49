#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "t4c/error.hpp"

namespace t4c {

enum class DType : uint8_t { u8 = 0, f32 = 1, f64 = 2 };

size_t dtype_size(DType dt);
const char* dtype_name(DType dt);

// Ordered list of positive extents, row-major (last axis fastest).
struct Shape {
  std::vector<int> dims;

  Shape() = default;
  Shape(std::initializer_list<int> d) : dims(d) {}
  explicit Shape(std::vector<int> d) : dims(std::move(d)) {}

  int rank() const { return static_cast<int>(dims.size()); }
  int operator[](int i) const { return dims[i]; }

  // Product of extents. Throws on empty shape, non-positive extents or
  // overflow of the addressable range.
  int64_t count() const;

  // Flat row-major offset of a multi-index: (i*W + j)*C + c for rank 3.
  int64_t index(std::span<const int> idx) const;

  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return dims != o.dims; }

  std::string str() const;  // "(495, 436, 115)"
};

// Dense N-dimensional array value. Data is owned, row-major, contiguous.
// Tensors are plain values: copyable, movable, immutable-by-convention once
// handed to another component.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, DType dtype);  // zero-filled

  static Tensor full(Shape shape, DType dtype, double fill);

  const Shape& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  int64_t count() const { return static_cast<int64_t>(bytes_.size() / dtype_size(dtype_)); }
  bool defined() const { return !shape_.dims.empty(); }

  std::span<uint8_t> u8();
  std::span<const uint8_t> u8() const;
  std::span<float> f32();
  std::span<const float> f32() const;
  std::span<double> f64();
  std::span<const double> f64() const;

  std::byte* raw() { return bytes_.data(); }
  const std::byte* raw() const { return bytes_.data(); }
  size_t byte_size() const { return bytes_.size(); }

  // Element access through double, any dtype; test/tooling convenience.
  double get(std::initializer_list<int> idx) const;
  void set(std::initializer_list<int> idx, double v);

 private:
  Shape shape_;
  DType dtype_ = DType::f32;
  std::vector<std::byte> bytes_;
};

// Relabels the shape; element count must match, data order is untouched.
Tensor reshape(const Tensor& t, Shape new_shape);

// [H,W,Ca] + [H,W,Cb] -> [H,W,Ca+Cb]; channels of a precede channels of b.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Elementwise math, f32/f64 only (u8 operands are an error).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

bool bitwise_equal(const Tensor& a, const Tensor& b);

Tensor to_f64(const Tensor& t);
Tensor to_f32(const Tensor& t);

}  // namespace t4c
