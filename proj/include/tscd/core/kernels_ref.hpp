#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

// Scalar reference kernels. These are the semantic ground truth for the SIMD
// variants and the only implementation used for double-precision paths.
//
// Conventions:
//   - images are H x W x C row-major with pixel vectors contiguous,
//   - conv weights are [k, k, Cin, Cout] with "same" padding, stride 1,
//   - backward kernels accumulate (+=) into their destination.
namespace tscd::kernels::ref {

template <typename T>
void conv2d(const T* in, int H, int W, int Cin, const T* w, int k, const T* bias, T* out,
            int Cout, bool accumulate) {
  const int p = k / 2;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      T* o = out + (static_cast<std::size_t>(y) * W + x) * Cout;
      if (!accumulate) {
        for (int co = 0; co < Cout; ++co) o[co] = bias ? bias[co] : T(0);
      } else if (bias) {
        for (int co = 0; co < Cout; ++co) o[co] += bias[co];
      }
      for (int dy = 0; dy < k; ++dy) {
        const int iy = y + dy - p;
        if (iy < 0 || iy >= H) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int ix = x + dx - p;
          if (ix < 0 || ix >= W) continue;
          const T* ipx = in + (static_cast<std::size_t>(iy) * W + ix) * Cin;
          const T* wt = w + ((static_cast<std::size_t>(dy) * k + dx) * Cin) * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            const T v = ipx[ci];
            const T* wr = wt + static_cast<std::size_t>(ci) * Cout;
            for (int co = 0; co < Cout; ++co) o[co] += v * wr[co];
          }
        }
      }
    }
  }
}

// dW[dy,dx,ci,co] += sum_{y,x} in[y+dy-p, x+dx-p, ci] * dout[y,x,co]
template <typename T>
void conv2d_wgrad(const T* in, int H, int W, int Cin, const T* dout, int k, T* dw, int Cout) {
  const int p = k / 2;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const T* g = dout + (static_cast<std::size_t>(y) * W + x) * Cout;
      for (int dy = 0; dy < k; ++dy) {
        const int iy = y + dy - p;
        if (iy < 0 || iy >= H) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int ix = x + dx - p;
          if (ix < 0 || ix >= W) continue;
          const T* ipx = in + (static_cast<std::size_t>(iy) * W + ix) * Cin;
          T* wt = dw + ((static_cast<std::size_t>(dy) * k + dx) * Cin) * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            const T v = ipx[ci];
            T* wr = wt + static_cast<std::size_t>(ci) * Cout;
            for (int co = 0; co < Cout; ++co) wr[co] += v * g[co];
          }
        }
      }
    }
  }
}

// 2x2 max pooling, stride 2; H and W even. arg stores the winning corner 0..3.
template <typename T>
void maxpool2(const T* in, int H, int W, int C, T* out, std::uint8_t* arg) {
  const int Ho = H / 2, Wo = W / 2;
  for (int y = 0; y < Ho; ++y) {
    for (int x = 0; x < Wo; ++x) {
      const T* p00 = in + (static_cast<std::size_t>(2 * y) * W + 2 * x) * C;
      const T* p01 = p00 + C;
      const T* p10 = p00 + static_cast<std::size_t>(W) * C;
      const T* p11 = p10 + C;
      T* o = out + (static_cast<std::size_t>(y) * Wo + x) * C;
      std::uint8_t* a = arg + (static_cast<std::size_t>(y) * Wo + x) * C;
      for (int ch = 0; ch < C; ++ch) {
        T best = p00[ch];
        std::uint8_t bi = 0;
        if (p01[ch] > best) { best = p01[ch]; bi = 1; }
        if (p10[ch] > best) { best = p10[ch]; bi = 2; }
        if (p11[ch] > best) { best = p11[ch]; bi = 3; }
        o[ch] = best;
        a[ch] = bi;
      }
    }
  }
}

template <typename T>
void maxpool2_bwd(const T* dout, int Ho, int Wo, int C, const std::uint8_t* arg, T* din) {
  const int W = 2 * Wo;
  for (int y = 0; y < Ho; ++y) {
    for (int x = 0; x < Wo; ++x) {
      const T* g = dout + (static_cast<std::size_t>(y) * Wo + x) * C;
      const std::uint8_t* a = arg + (static_cast<std::size_t>(y) * Wo + x) * C;
      T* base = din + (static_cast<std::size_t>(2 * y) * W + 2 * x) * C;
      for (int ch = 0; ch < C; ++ch) {
        const int corner = a[ch];
        T* dst = base + (corner >> 1) * static_cast<std::size_t>(W) * C + (corner & 1) * C;
        dst[ch] += g[ch];
      }
    }
  }
}

// Nearest-neighbour x2 upsampling.
template <typename T>
void upsample2(const T* in, int H, int W, int C, T* out) {
  const int Wo = 2 * W;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const T* s = in + (static_cast<std::size_t>(y) * W + x) * C;
      T* d0 = out + (static_cast<std::size_t>(2 * y) * Wo + 2 * x) * C;
      T* d1 = d0 + C;
      T* d2 = d0 + static_cast<std::size_t>(Wo) * C;
      T* d3 = d2 + C;
      for (int ch = 0; ch < C; ++ch) {
        d0[ch] = s[ch];
        d1[ch] = s[ch];
        d2[ch] = s[ch];
        d3[ch] = s[ch];
      }
    }
  }
}

template <typename T>
void upsample2_bwd(const T* dout, int Ho, int Wo, int C, T* din) {
  const int H = Ho / 2, W = Wo / 2;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const T* g0 = dout + (static_cast<std::size_t>(2 * y) * Wo + 2 * x) * C;
      const T* g1 = g0 + C;
      const T* g2 = g0 + static_cast<std::size_t>(Wo) * C;
      const T* g3 = g2 + C;
      T* d = din + (static_cast<std::size_t>(y) * W + x) * C;
      for (int ch = 0; ch < C; ++ch) d[ch] += g0[ch] + g1[ch] + g2[ch] + g3[ch];
    }
  }
}

template <typename T>
void relu(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void sigmoid(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T v = x[i];
    if (v < T(-30)) v = T(-30);
    if (v > T(30)) v = T(30);
    y[i] = T(1) / (T(1) + std::exp(-v));
  }
}

template <typename T>
void sigmoid_bwd(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void tanh_fwd(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_bwd(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void vexp(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

template <typename T>
void vlog(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
}

template <typename T>
void add(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void sub(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

// y += a .* b
template <typename T>
void fma_acc(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

// y += alpha * x
template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

// dx += dy / x
template <typename T>
void div_acc(const T* dy, const T* x, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] / x[i];
}

// out[c] = sum over pixels of x[p, c]
template <typename T>
void ch_sum(const T* x, std::size_t hw, int C, T* out, bool accumulate) {
  if (!accumulate)
    for (int c = 0; c < C; ++c) out[c] = T(0);
  for (std::size_t p = 0; p < hw; ++p) {
    const T* row = x + p * C;
    for (int c = 0; c < C; ++c) out[c] += row[c];
  }
}

// out[c] += sum over pixels of a[p, c] * b[p, c]
template <typename T>
void ch_dot_acc(const T* a, const T* b, std::size_t hw, int C, T* out) {
  for (std::size_t p = 0; p < hw; ++p) {
    const T* ra = a + p * C;
    const T* rb = b + p * C;
    for (int c = 0; c < C; ++c) out[c] += ra[c] * rb[c];
  }
}

// y[p, c] = x[p, c] * v[c]
template <typename T>
void bc_mul(const T* x, const T* v, std::size_t hw, int C, T* y) {
  for (std::size_t p = 0; p < hw; ++p) {
    const T* r = x + p * C;
    T* o = y + p * C;
    for (int c = 0; c < C; ++c) o[c] = r[c] * v[c];
  }
}

// y[p, c] += x[p, c] * v[c]
template <typename T>
void bc_mul_acc(const T* x, const T* v, std::size_t hw, int C, T* y) {
  for (std::size_t p = 0; p < hw; ++p) {
    const T* r = x + p * C;
    T* o = y + p * C;
    for (int c = 0; c < C; ++c) o[c] += r[c] * v[c];
  }
}

// y[p, c] = (x[p, c] + a[c]) * m[c]   (batchnorm-style affine per channel)
template <typename T>
void bc_shift_scale(const T* x, const T* a, const T* m, std::size_t hw, int C, T* y) {
  for (std::size_t p = 0; p < hw; ++p) {
    const T* r = x + p * C;
    T* o = y + p * C;
    for (int c = 0; c < C; ++c) o[c] = (r[c] + a[c]) * m[c];
  }
}

template <typename T>
double reduce_sum(const T* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// C[M,N] (+)= A[M,K] x B[K,N]; A/B optionally transposed (logical shapes above).
template <typename T>
void matmul(const T* A, const T* B, T* C, int M, int K, int N, bool ta, bool tb,
            bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < static_cast<std::size_t>(M) * N; ++i) C[i] = T(0);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) {
      const T a = ta ? A[static_cast<std::size_t>(k) * M + m] : A[static_cast<std::size_t>(m) * K + k];
      const T* brow = tb ? B + k : B + static_cast<std::size_t>(k) * N;
      T* crow = C + static_cast<std::size_t>(m) * N;
      if (tb) {
        for (int n = 0; n < N; ++n) crow[n] += a * brow[static_cast<std::size_t>(n) * K];
      } else {
        for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
      }
    }
  }
}

}  // namespace tscd::kernels::ref
