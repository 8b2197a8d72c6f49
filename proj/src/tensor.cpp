#include "t4c/tensor.hpp"

#include <cmath>
#include <cstring>

namespace t4c {

size_t dtype_size(DType dt) {
  switch (dt) {
    case DType::u8: return 1;
    case DType::f32: return 4;
    case DType::f64: return 8;
  }
  fail("unknown dtype code");
}

const char* dtype_name(DType dt) {
  switch (dt) {
    case DType::u8: return "u8";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
  }
  fail("unknown dtype code");
}

int64_t Shape::count() const {
  check(!dims.empty(), "shape must have at least one axis");
  int64_t n = 1;
  for (int d : dims) {
    check(d >= 1, "shape extent must be >= 1, got " + std::to_string(d));
    check(n <= (int64_t{1} << 40) / d, "shape element count overflows");
    n *= d;
  }
  return n;
}

int64_t Shape::index(std::span<const int> idx) const {
  check(static_cast<int>(idx.size()) == rank(), "index rank mismatch");
  int64_t off = 0;
  for (int i = 0; i < rank(); ++i) {
    check(idx[i] >= 0 && idx[i] < dims[i], "index out of range on axis " + std::to_string(i));
    off = off * dims[i] + idx[i];
  }
  return off;
}

std::string Shape::str() const {
  std::string s = "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  bytes_.resize(static_cast<size_t>(shape_.count()) * dtype_size(dtype_));
}

Tensor Tensor::full(Shape shape, DType dtype, double fill) {
  Tensor t(std::move(shape), dtype);
  switch (dtype) {
    case DType::u8: {
      check(fill >= 0.0 && fill <= 255.0 && fill == std::floor(fill),
            "u8 fill must be an integer in 0..255");
      auto s = t.u8();
      std::fill(s.begin(), s.end(), static_cast<uint8_t>(fill));
      break;
    }
    case DType::f32: {
      auto s = t.f32();
      std::fill(s.begin(), s.end(), static_cast<float>(fill));
      break;
    }
    case DType::f64: {
      auto s = t.f64();
      std::fill(s.begin(), s.end(), fill);
      break;
    }
  }
  return t;
}

namespace {
void want(DType have, DType need) {
  check(have == need, std::string("tensor is ") + dtype_name(have) + ", expected " + dtype_name(need));
}
}  // namespace

std::span<uint8_t> Tensor::u8() {
  want(dtype_, DType::u8);
  return {reinterpret_cast<uint8_t*>(bytes_.data()), bytes_.size()};
}
std::span<const uint8_t> Tensor::u8() const {
  want(dtype_, DType::u8);
  return {reinterpret_cast<const uint8_t*>(bytes_.data()), bytes_.size()};
}
std::span<float> Tensor::f32() {
  want(dtype_, DType::f32);
  return {reinterpret_cast<float*>(bytes_.data()), bytes_.size() / 4};
}
std::span<const float> Tensor::f32() const {
  want(dtype_, DType::f32);
  return {reinterpret_cast<const float*>(bytes_.data()), bytes_.size() / 4};
}
std::span<double> Tensor::f64() {
  want(dtype_, DType::f64);
  return {reinterpret_cast<double*>(bytes_.data()), bytes_.size() / 8};
}
std::span<const double> Tensor::f64() const {
  want(dtype_, DType::f64);
  return {reinterpret_cast<const double*>(bytes_.data()), bytes_.size() / 8};
}

double Tensor::get(std::initializer_list<int> idx) const {
  int64_t off = shape_.index(std::span<const int>(idx.begin(), idx.size()));
  switch (dtype_) {
    case DType::u8: return u8()[off];
    case DType::f32: return f32()[off];
    case DType::f64: return f64()[off];
  }
  fail("unknown dtype code");
}

void Tensor::set(std::initializer_list<int> idx, double v) {
  int64_t off = shape_.index(std::span<const int>(idx.begin(), idx.size()));
  switch (dtype_) {
    case DType::u8: u8()[off] = static_cast<uint8_t>(v); break;
    case DType::f32: f32()[off] = static_cast<float>(v); break;
    case DType::f64: f64()[off] = v; break;
  }
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  check(t.shape().count() == new_shape.count(),
        "reshape element count mismatch: " + t.shape().str() + " -> " + new_shape.str());
  Tensor out(std::move(new_shape), t.dtype());
  std::memcpy(out.raw(), t.raw(), t.byte_size());
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.shape().rank() == 3 && b.shape().rank() == 3, "concat_channels expects rank-3 [H,W,C] tensors");
  check(a.dtype() == b.dtype(), "concat_channels dtype mismatch");
  check(a.shape()[0] == b.shape()[0] && a.shape()[1] == b.shape()[1],
        "concat_channels spatial mismatch: " + a.shape().str() + " vs " + b.shape().str());
  int h = a.shape()[0], w = a.shape()[1];
  int ca = a.shape()[2], cb = b.shape()[2];
  Tensor out(Shape{h, w, ca + cb}, a.dtype());
  size_t es = dtype_size(a.dtype());
  const std::byte* pa = a.raw();
  const std::byte* pb = b.raw();
  std::byte* po = out.raw();
  for (int64_t px = 0; px < int64_t{h} * w; ++px) {
    std::memcpy(po, pa, ca * es);
    std::memcpy(po + ca * es, pb, cb * es);
    pa += ca * es;
    pb += cb * es;
    po += (ca + cb) * es;
  }
  return out;
}

namespace {

enum class EwOp { add, sub, mul };

template <typename T>
void ew_apply(EwOp op, const T* a, const T* b, T* o, int64_t n) {
  switch (op) {
    case EwOp::add: for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i]; break;
    case EwOp::sub: for (int64_t i = 0; i < n; ++i) o[i] = a[i] - b[i]; break;
    case EwOp::mul: for (int64_t i = 0; i < n; ++i) o[i] = a[i] * b[i]; break;
  }
}

Tensor ew(EwOp op, const Tensor& a, const Tensor& b) {
  check(a.dtype() != DType::u8 && b.dtype() != DType::u8, "elementwise math requires float tensors");
  check(a.dtype() == b.dtype(), "elementwise dtype mismatch");
  check(a.shape() == b.shape(),
        "elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  Tensor out(a.shape(), a.dtype());
  if (a.dtype() == DType::f32)
    ew_apply(op, a.f32().data(), b.f32().data(), out.f32().data(), a.count());
  else
    ew_apply(op, a.f64().data(), b.f64().data(), out.f64().data(), a.count());
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return ew(EwOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return ew(EwOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return ew(EwOp::mul, a, b); }

Tensor scale(const Tensor& a, double s) {
  check(a.dtype() != DType::u8, "elementwise math requires float tensors");
  Tensor out(a.shape(), a.dtype());
  if (a.dtype() == DType::f32) {
    auto src = a.f32();
    auto dst = out.f32();
    for (int64_t i = 0; i < a.count(); ++i) dst[i] = src[i] * static_cast<float>(s);
  } else {
    auto src = a.f64();
    auto dst = out.f64();
    for (int64_t i = 0; i < a.count(); ++i) dst[i] = src[i] * s;
  }
  return out;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.dtype() == b.dtype() && a.shape() == b.shape() &&
         std::memcmp(a.raw(), b.raw(), a.byte_size()) == 0;
}

Tensor to_f64(const Tensor& t) {
  if (t.dtype() == DType::f64) return t;
  Tensor out(t.shape(), DType::f64);
  auto dst = out.f64();
  if (t.dtype() == DType::f32) {
    auto src = t.f32();
    for (int64_t i = 0; i < t.count(); ++i) dst[i] = src[i];
  } else {
    auto src = t.u8();
    for (int64_t i = 0; i < t.count(); ++i) dst[i] = src[i];
  }
  return out;
}

Tensor to_f32(const Tensor& t) {
  if (t.dtype() == DType::f32) return t;
  Tensor out(t.shape(), DType::f32);
  auto dst = out.f32();
  if (t.dtype() == DType::f64) {
    auto src = t.f64();
    for (int64_t i = 0; i < t.count(); ++i) dst[i] = static_cast<float>(src[i]);
  } else {
    auto src = t.u8();
    for (int64_t i = 0; i < t.count(); ++i) dst[i] = src[i];
  }
  return out;
}

}  // namespace t4c
