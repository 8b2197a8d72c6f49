#pragma once

#include <cstdint>

namespace t4c::kernels {

// Output extent of a strided op under the SAME-ceil rule.
inline int ceil_out(int extent, int stride) { return (extent + stride - 1) / stride; }

// Leading (top/left) pad under SAME-ceil: output = ceil(in/stride), an odd
// total pad puts the extra row/column on the bottom/right.
inline int lead_pad(int extent, int kernel, int stride) {
  int total = (ceil_out(extent, stride) - 1) * stride + kernel - extent;
  if (total < 0) total = 0;
  return total / 2;
}

// All buffers are dense row-major channels-last: x[(y*W + x)*C + c].
// Weights are laid out (kh, kw, Cin, Cout); the Cout axis is contiguous.
// Backward kernels accumulate (+=) into their output buffers.

struct ConvDims {
  int h, w, cin;       // input
  int cout, kh, kw, stride;
  int out_h() const { return ceil_out(h, stride); }
  int out_w() const { return ceil_out(w, stride); }
};

template <typename T>
void conv2d_fwd(const T* x, const T* wgt, const T* bias, T* y, const ConvDims& d);
template <typename T>
void conv2d_bwd_data(const T* dy, const T* wgt, T* dx, const ConvDims& d);
template <typename T>
void conv2d_bwd_param(const T* x, const T* dy, T* dw, T* db, const ConvDims& d);

// Stride-2 transposed convolution, the adjoint of conv2d's stride-2 access
// pattern; output is (out_h, out_w) with ceil(out/2) == input extent.
// Weights are (kh, kw, Cin, Cout) with Cin = channels of x.
struct DeconvDims {
  int h, w, cin;       // coarse input
  int cout, kh, kw;
  int out_h, out_w;    // fine target, ceil(out/2) == (h, w)
};

template <typename T>
void deconv2_fwd(const T* x, const T* wgt, const T* bias, T* y, const DeconvDims& d);
template <typename T>
void deconv2_bwd_data(const T* dy, const T* wgt, T* dx, const DeconvDims& d);
template <typename T>
void deconv2_bwd_param(const T* x, const T* dy, T* dw, T* db, const DeconvDims& d);

// Ceil-mode pooling; boundary windows reduce over in-bounds elements only.
enum class PoolKind { avg, max };

struct PoolDims {
  int h, w, c;
  int kh, kw, stride;
  int out_h() const { return ceil_out(h, stride); }
  int out_w() const { return ceil_out(w, stride); }
};

template <typename T>
void pool_fwd(PoolKind kind, const T* x, T* y, const PoolDims& d);
template <typename T>
void pool_bwd(PoolKind kind, const T* x, const T* dy, T* dx, const PoolDims& d);

// Bilinear upsampling, align-corners=false (pixel centers at (i+0.5)/n).
struct UpsampleDims {
  int h, w, c;
  int out_h, out_w;
};

template <typename T>
void upsample_linear_fwd(const T* x, T* y, const UpsampleDims& d);
template <typename T>
void upsample_linear_bwd(const T* dy, T* dx, const UpsampleDims& d);

template <typename T>
void relu_fwd(const T* x, T* y, int64_t n);
template <typename T>
void relu_bwd(const T* x, const T* dy, T* dx, int64_t n);

// Mean over all elements of (a-b)^2, accumulated in double.
template <typename T>
double mse_fwd(const T* a, const T* b, int64_t n);
// d/da of upstream * mse(a,b); db gets the negated contribution (may be null).
template <typename T>
void mse_bwd(const T* a, const T* b, double upstream, T* da, T* db, int64_t n);

}  // namespace t4c::kernels
