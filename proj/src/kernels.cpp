#include "t4c/kernels.hpp"

#include <algorithm>
#include <vector>

#include "t4c/parallel.hpp"

namespace t4c::kernels {

template <typename T>
void conv2d_fwd(const T* x, const T* wgt, const T* bias, T* y, const ConvDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const int pt = lead_pad(d.h, d.kh, d.stride);
  const int pl = lead_pad(d.w, d.kw, d.stride);
  parallel_for(oh, [&](int64_t row_begin, int64_t row_end) {
    std::vector<T> acc(d.cout);
    for (int64_t oy = row_begin; oy < row_end; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < d.cout; ++co) acc[co] = bias ? bias[co] : T(0);
        for (int ky = 0; ky < d.kh; ++ky) {
          int iy = static_cast<int>(oy) * d.stride - pt + ky;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int ix = ox * d.stride - pl + kx;
            if (ix < 0 || ix >= d.w) continue;
            const T* xp = x + (static_cast<int64_t>(iy) * d.w + ix) * d.cin;
            const T* wp = wgt + (static_cast<int64_t>(ky) * d.kw + kx) * d.cin * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              T xv = xp[ci];
              const T* wrow = wp + static_cast<int64_t>(ci) * d.cout;
              for (int co = 0; co < d.cout; ++co) acc[co] += xv * wrow[co];
            }
          }
        }
        T* yp = y + (oy * ow + ox) * d.cout;
        for (int co = 0; co < d.cout; ++co) yp[co] = acc[co];
      }
    }
  });
}

template <typename T>
void conv2d_bwd_data(const T* dy, const T* wgt, T* dx, const ConvDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const int pt = lead_pad(d.h, d.kh, d.stride);
  const int pl = lead_pad(d.w, d.kw, d.stride);
  // Gather form: each input row is owned by one worker.
  parallel_for(d.h, [&](int64_t row_begin, int64_t row_end) {
    for (int64_t iy = row_begin; iy < row_end; ++iy) {
      for (int ix = 0; ix < d.w; ++ix) {
        T* dxp = dx + (iy * d.w + ix) * d.cin;
        for (int ky = 0; ky < d.kh; ++ky) {
          int64_t num = iy + pt - ky;
          if (num < 0 || num % d.stride) continue;
          int64_t oy = num / d.stride;
          if (oy >= oh) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int numx = ix + pl - kx;
            if (numx < 0 || numx % d.stride) continue;
            int ox = numx / d.stride;
            if (ox >= ow) continue;
            const T* dyp = dy + (oy * ow + ox) * d.cout;
            const T* wp = wgt + (static_cast<int64_t>(ky) * d.kw + kx) * d.cin * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              const T* wrow = wp + static_cast<int64_t>(ci) * d.cout;
              T s = 0;
              for (int co = 0; co < d.cout; ++co) s += dyp[co] * wrow[co];
              dxp[ci] += s;
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_param(const T* x, const T* dy, T* dw, T* db, const ConvDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const int pt = lead_pad(d.h, d.kh, d.stride);
  const int pl = lead_pad(d.w, d.kw, d.stride);
  // Each (ky,kx) weight slice is owned by one worker; db by the first.
  parallel_for(static_cast<int64_t>(d.kh) * d.kw, [&](int64_t kb, int64_t ke) {
    for (int64_t k = kb; k < ke; ++k) {
      int ky = static_cast<int>(k) / d.kw;
      int kx = static_cast<int>(k) % d.kw;
      T* dwp = dw + k * d.cin * d.cout;
      for (int oy = 0; oy < oh; ++oy) {
        int iy = oy * d.stride - pt + ky;
        if (iy < 0 || iy >= d.h) continue;
        for (int ox = 0; ox < ow; ++ox) {
          int ix = ox * d.stride - pl + kx;
          if (ix < 0 || ix >= d.w) continue;
          const T* xp = x + (static_cast<int64_t>(iy) * d.w + ix) * d.cin;
          const T* dyp = dy + (static_cast<int64_t>(oy) * ow + ox) * d.cout;
          for (int ci = 0; ci < d.cin; ++ci) {
            T xv = xp[ci];
            T* dwrow = dwp + static_cast<int64_t>(ci) * d.cout;
            for (int co = 0; co < d.cout; ++co) dwrow[co] += xv * dyp[co];
          }
        }
      }
    }
  });
  if (db) {
    for (int64_t p = 0; p < static_cast<int64_t>(oh) * ow; ++p) {
      const T* dyp = dy + p * d.cout;
      for (int co = 0; co < d.cout; ++co) db[co] += dyp[co];
    }
  }
}

template <typename T>
void deconv2_fwd(const T* x, const T* wgt, const T* bias, T* y, const DeconvDims& d) {
  const int pt = lead_pad(d.out_h, d.kh, 2);
  const int pl = lead_pad(d.out_w, d.kw, 2);
  // Gather over output rows so each row has one owner.
  parallel_for(d.out_h, [&](int64_t row_begin, int64_t row_end) {
    std::vector<T> acc(d.cout);
    for (int64_t fy = row_begin; fy < row_end; ++fy) {
      for (int fx = 0; fx < d.out_w; ++fx) {
        for (int co = 0; co < d.cout; ++co) acc[co] = bias ? bias[co] : T(0);
        for (int ky = 0; ky < d.kh; ++ky) {
          int64_t num = fy + pt - ky;
          if (num < 0 || num % 2) continue;
          int64_t iy = num / 2;
          if (iy >= d.h) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int numx = fx + pl - kx;
            if (numx < 0 || numx % 2) continue;
            int ix = numx / 2;
            if (ix >= d.w) continue;
            const T* xp = x + (iy * d.w + ix) * d.cin;
            const T* wp = wgt + (static_cast<int64_t>(ky) * d.kw + kx) * d.cin * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              T xv = xp[ci];
              const T* wrow = wp + static_cast<int64_t>(ci) * d.cout;
              for (int co = 0; co < d.cout; ++co) acc[co] += xv * wrow[co];
            }
          }
        }
        T* yp = y + (fy * d.out_w + fx) * d.cout;
        for (int co = 0; co < d.cout; ++co) yp[co] = acc[co];
      }
    }
  });
}

template <typename T>
void deconv2_bwd_data(const T* dy, const T* wgt, T* dx, const DeconvDims& d) {
  const int pt = lead_pad(d.out_h, d.kh, 2);
  const int pl = lead_pad(d.out_w, d.kw, 2);
  // Same access pattern as a stride-2 conv forward over dy.
  parallel_for(d.h, [&](int64_t row_begin, int64_t row_end) {
    for (int64_t iy = row_begin; iy < row_end; ++iy) {
      for (int ix = 0; ix < d.w; ++ix) {
        T* dxp = dx + (iy * d.w + ix) * d.cin;
        for (int ky = 0; ky < d.kh; ++ky) {
          int fy = static_cast<int>(iy) * 2 - pt + ky;
          if (fy < 0 || fy >= d.out_h) continue;
          for (int kx = 0; kx < d.kw; ++kx) {
            int fx = ix * 2 - pl + kx;
            if (fx < 0 || fx >= d.out_w) continue;
            const T* dyp = dy + (static_cast<int64_t>(fy) * d.out_w + fx) * d.cout;
            const T* wp = wgt + (static_cast<int64_t>(ky) * d.kw + kx) * d.cin * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              const T* wrow = wp + static_cast<int64_t>(ci) * d.cout;
              T s = 0;
              for (int co = 0; co < d.cout; ++co) s += dyp[co] * wrow[co];
              dxp[ci] += s;
            }
          }
        }
      }
    }
  });
}

template <typename T>
void deconv2_bwd_param(const T* x, const T* dy, T* dw, T* db, const DeconvDims& d) {
  const int pt = lead_pad(d.out_h, d.kh, 2);
  const int pl = lead_pad(d.out_w, d.kw, 2);
  parallel_for(static_cast<int64_t>(d.kh) * d.kw, [&](int64_t kb, int64_t ke) {
    for (int64_t k = kb; k < ke; ++k) {
      int ky = static_cast<int>(k) / d.kw;
      int kx = static_cast<int>(k) % d.kw;
      T* dwp = dw + k * d.cin * d.cout;
      for (int iy = 0; iy < d.h; ++iy) {
        int fy = iy * 2 - pt + ky;
        if (fy < 0 || fy >= d.out_h) continue;
        for (int ix = 0; ix < d.w; ++ix) {
          int fx = ix * 2 - pl + kx;
          if (fx < 0 || fx >= d.out_w) continue;
          const T* xp = x + (static_cast<int64_t>(iy) * d.w + ix) * d.cin;
          const T* dyp = dy + (static_cast<int64_t>(fy) * d.out_w + fx) * d.cout;
          for (int ci = 0; ci < d.cin; ++ci) {
            T xv = xp[ci];
            T* dwrow = dwp + static_cast<int64_t>(ci) * d.cout;
            for (int co = 0; co < d.cout; ++co) dwrow[co] += xv * dyp[co];
          }
        }
      }
    }
  });
  if (db) {
    for (int64_t p = 0; p < static_cast<int64_t>(d.out_h) * d.out_w; ++p) {
      const T* dyp = dy + p * d.cout;
      for (int co = 0; co < d.cout; ++co) db[co] += dyp[co];
    }
  }
}

template <typename T>
void pool_fwd(PoolKind kind, const T* x, T* y, const PoolDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const int pt = lead_pad(d.h, d.kh, d.stride);
  const int pl = lead_pad(d.w, d.kw, d.stride);
  parallel_for(oh, [&](int64_t row_begin, int64_t row_end) {
    for (int64_t oy = row_begin; oy < row_end; ++oy) {
      int y0 = std::max<int>(static_cast<int>(oy) * d.stride - pt, 0);
      int y1 = std::min<int>(static_cast<int>(oy) * d.stride - pt + d.kh, d.h);
      for (int ox = 0; ox < ow; ++ox) {
        int x0 = std::max(ox * d.stride - pl, 0);
        int x1 = std::min(ox * d.stride - pl + d.kw, d.w);
        T* yp = y + (oy * ow + ox) * d.c;
        if (kind == PoolKind::avg) {
          int n = (y1 - y0) * (x1 - x0);
          for (int c = 0; c < d.c; ++c) {
            T s = 0;
            for (int iy = y0; iy < y1; ++iy)
              for (int ix = x0; ix < x1; ++ix) s += x[(static_cast<int64_t>(iy) * d.w + ix) * d.c + c];
            yp[c] = s / static_cast<T>(n);
          }
        } else {
          for (int c = 0; c < d.c; ++c) {
            T m = x[(static_cast<int64_t>(y0) * d.w + x0) * d.c + c];
            for (int iy = y0; iy < y1; ++iy)
              for (int ix = x0; ix < x1; ++ix) m = std::max(m, x[(static_cast<int64_t>(iy) * d.w + ix) * d.c + c]);
            yp[c] = m;
          }
        }
      }
    }
  });
}

template <typename T>
void pool_bwd(PoolKind kind, const T* x, const T* dy, T* dx, const PoolDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const int pt = lead_pad(d.h, d.kh, d.stride);
  const int pl = lead_pad(d.w, d.kw, d.stride);
  // Scatter; single pass over output windows. Windows overlap only when
  // stride < kernel, so run sequentially for determinism.
  for (int oy = 0; oy < oh; ++oy) {
    int y0 = std::max(oy * d.stride - pt, 0);
    int y1 = std::min(oy * d.stride - pt + d.kh, d.h);
    for (int ox = 0; ox < ow; ++ox) {
      int x0 = std::max(ox * d.stride - pl, 0);
      int x1 = std::min(ox * d.stride - pl + d.kw, d.w);
      const T* dyp = dy + (static_cast<int64_t>(oy) * ow + ox) * d.c;
      if (kind == PoolKind::avg) {
        T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
        for (int c = 0; c < d.c; ++c) {
          T g = dyp[c] * inv;
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix) dx[(static_cast<int64_t>(iy) * d.w + ix) * d.c + c] += g;
        }
      } else {
        // Route to the first maximum, matching forward's scan order.
        for (int c = 0; c < d.c; ++c) {
          int best_y = y0, best_x = x0;
          T m = x[(static_cast<int64_t>(y0) * d.w + x0) * d.c + c];
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix) {
              T v = x[(static_cast<int64_t>(iy) * d.w + ix) * d.c + c];
              if (v > m) {
                m = v;
                best_y = iy;
                best_x = ix;
              }
            }
          dx[(static_cast<int64_t>(best_y) * d.w + best_x) * d.c + c] += dyp[c];
        }
      }
    }
  }
}

template <typename T>
void upsample_linear_fwd(const T* x, T* y, const UpsampleDims& d) {
  const double sy = static_cast<double>(d.h) / d.out_h;
  const double sx = static_cast<double>(d.w) / d.out_w;
  parallel_for(d.out_h, [&](int64_t row_begin, int64_t row_end) {
    for (int64_t oy = row_begin; oy < row_end; ++oy) {
      double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
      if (fy < 0) fy = 0;
      int y0 = std::min(static_cast<int>(fy), d.h - 1);
      int y1 = std::min(y0 + 1, d.h - 1);
      T wy = static_cast<T>(fy - y0);
      for (int ox = 0; ox < d.out_w; ++ox) {
        double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
        if (fx < 0) fx = 0;
        int x0 = std::min(static_cast<int>(fx), d.w - 1);
        int x1 = std::min(x0 + 1, d.w - 1);
        T wx = static_cast<T>(fx - x0);
        const T* p00 = x + (static_cast<int64_t>(y0) * d.w + x0) * d.c;
        const T* p01 = x + (static_cast<int64_t>(y0) * d.w + x1) * d.c;
        const T* p10 = x + (static_cast<int64_t>(y1) * d.w + x0) * d.c;
        const T* p11 = x + (static_cast<int64_t>(y1) * d.w + x1) * d.c;
        T* yp = y + (oy * d.out_w + ox) * d.c;
        for (int c = 0; c < d.c; ++c) {
          // Nested lerps keep constants exact to the ulp.
          T top = p00[c] + wx * (p01[c] - p00[c]);
          T bot = p10[c] + wx * (p11[c] - p10[c]);
          yp[c] = top + wy * (bot - top);
        }
      }
    }
  });
}

template <typename T>
void upsample_linear_bwd(const T* dy, T* dx, const UpsampleDims& d) {
  const double sy = static_cast<double>(d.h) / d.out_h;
  const double sx = static_cast<double>(d.w) / d.out_w;
  for (int oy = 0; oy < d.out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    if (fy < 0) fy = 0;
    int y0 = std::min(static_cast<int>(fy), d.h - 1);
    int y1 = std::min(y0 + 1, d.h - 1);
    T wy = static_cast<T>(fy - y0);
    for (int ox = 0; ox < d.out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      if (fx < 0) fx = 0;
      int x0 = std::min(static_cast<int>(fx), d.w - 1);
      int x1 = std::min(x0 + 1, d.w - 1);
      T wx = static_cast<T>(fx - x0);
      const T* dyp = dy + (static_cast<int64_t>(oy) * d.out_w + ox) * d.c;
      T* p00 = dx + (static_cast<int64_t>(y0) * d.w + x0) * d.c;
      T* p01 = dx + (static_cast<int64_t>(y0) * d.w + x1) * d.c;
      T* p10 = dx + (static_cast<int64_t>(y1) * d.w + x0) * d.c;
      T* p11 = dx + (static_cast<int64_t>(y1) * d.w + x1) * d.c;
      for (int c = 0; c < d.c; ++c) {
        T g = dyp[c];
        T gt = g * (T(1) - wy);
        T gb = g * wy;
        p00[c] += gt * (T(1) - wx);
        p01[c] += gt * wx;
        p10[c] += gb * (T(1) - wx);
        p11[c] += gb * wx;
      }
    }
  }
}

template <typename T>
void relu_fwd(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd(const T* x, const T* dy, T* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
double mse_fwd(const T* a, const T* b, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc / static_cast<double>(n);
}

template <typename T>
void mse_bwd(const T* a, const T* b, double upstream, T* da, T* db, int64_t n) {
  const T k = static_cast<T>(2.0 * upstream / static_cast<double>(n));
  for (int64_t i = 0; i < n; ++i) {
    T g = k * (a[i] - b[i]);
    da[i] += g;
    if (db) db[i] -= g;
  }
}

#define T4C_INSTANTIATE(T)                                                            \
  template void conv2d_fwd<T>(const T*, const T*, const T*, T*, const ConvDims&);     \
  template void conv2d_bwd_data<T>(const T*, const T*, T*, const ConvDims&);          \
  template void conv2d_bwd_param<T>(const T*, const T*, T*, T*, const ConvDims&);     \
  template void deconv2_fwd<T>(const T*, const T*, const T*, T*, const DeconvDims&);  \
  template void deconv2_bwd_data<T>(const T*, const T*, T*, const DeconvDims&);       \
  template void deconv2_bwd_param<T>(const T*, const T*, T*, T*, const DeconvDims&);  \
  template void pool_fwd<T>(PoolKind, const T*, T*, const PoolDims&);                 \
  template void pool_bwd<T>(PoolKind, const T*, const T*, T*, const PoolDims&);       \
  template void upsample_linear_fwd<T>(const T*, T*, const UpsampleDims&);            \
  template void upsample_linear_bwd<T>(const T*, T*, const UpsampleDims&);            \
  template void relu_fwd<T>(const T*, T*, int64_t);                                   \
  template void relu_bwd<T>(const T*, const T*, T*, int64_t);                         \
  template double mse_fwd<T>(const T*, const T*, int64_t);                            \
  template void mse_bwd<T>(const T*, const T*, double, T*, T*, int64_t);

T4C_INSTANTIATE(float)
T4C_INSTANTIATE(double)

#undef T4C_INSTANTIATE

}  // namespace t4c::kernels
