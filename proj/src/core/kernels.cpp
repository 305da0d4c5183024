#include "tscd/core/kernels.hpp"

#include <cstdlib>

#include "tscd/core/kernels_avx2.hpp"

namespace tscd::kernels {

static Caps detect() {
  Caps c;
#if defined(__x86_64__) || defined(__i386__)
  c.avx2 = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#endif
  const char* force = std::getenv("TSCD_FORCE_SCALAR");
  if (force && force[0] == '1') c.avx2 = false;
  return c;
}

const Caps& caps() {
  static const Caps c = detect();
  return c;
}

bool using_avx2() { return caps().avx2; }

#define TSCD_DISPATCH(fn, ...)          \
  do {                                  \
    if (caps().avx2)                    \
      avx2::fn(__VA_ARGS__);            \
    else                                \
      ref::fn(__VA_ARGS__);             \
  } while (0)

void Kern<float>::conv2d(const float* in, int H, int W, int Cin, const float* w, int k,
                         const float* bias, float* out, int Cout, bool accumulate) {
  TSCD_DISPATCH(conv2d, in, H, W, Cin, w, k, bias, out, Cout, accumulate);
}
void Kern<float>::conv2d_wgrad(const float* in, int H, int W, int Cin, const float* dout, int k,
                               float* dw, int Cout) {
  TSCD_DISPATCH(conv2d_wgrad, in, H, W, Cin, dout, k, dw, Cout);
}
void Kern<float>::relu(const float* x, float* y, std::size_t n) { TSCD_DISPATCH(relu, x, y, n); }
void Kern<float>::relu_bwd(const float* y, const float* dy, float* dx, std::size_t n) {
  TSCD_DISPATCH(relu_bwd, y, dy, dx, n);
}
void Kern<float>::sigmoid(const float* x, float* y, std::size_t n) { TSCD_DISPATCH(sigmoid, x, y, n); }
void Kern<float>::sigmoid_bwd(const float* y, const float* dy, float* dx, std::size_t n) {
  TSCD_DISPATCH(sigmoid_bwd, y, dy, dx, n);
}
void Kern<float>::tanh_fwd(const float* x, float* y, std::size_t n) { TSCD_DISPATCH(tanh_fwd, x, y, n); }
void Kern<float>::tanh_bwd(const float* y, const float* dy, float* dx, std::size_t n) {
  TSCD_DISPATCH(tanh_bwd, y, dy, dx, n);
}
void Kern<float>::vexp(const float* x, float* y, std::size_t n) { TSCD_DISPATCH(vexp, x, y, n); }
void Kern<float>::add(const float* a, const float* b, float* y, std::size_t n) {
  TSCD_DISPATCH(add, a, b, y, n);
}
void Kern<float>::sub(const float* a, const float* b, float* y, std::size_t n) {
  TSCD_DISPATCH(sub, a, b, y, n);
}
void Kern<float>::mul(const float* a, const float* b, float* y, std::size_t n) {
  TSCD_DISPATCH(mul, a, b, y, n);
}
void Kern<float>::fma_acc(const float* a, const float* b, float* y, std::size_t n) {
  TSCD_DISPATCH(fma_acc, a, b, y, n);
}
void Kern<float>::axpy(float alpha, const float* x, float* y, std::size_t n) {
  TSCD_DISPATCH(axpy, alpha, x, y, n);
}
void Kern<float>::scale(float alpha, const float* x, float* y, std::size_t n) {
  TSCD_DISPATCH(scale, alpha, x, y, n);
}
void Kern<float>::ch_sum(const float* x, std::size_t hw, int C, float* out, bool accumulate) {
  TSCD_DISPATCH(ch_sum, x, hw, C, out, accumulate);
}
void Kern<float>::ch_dot_acc(const float* a, const float* b, std::size_t hw, int C, float* out) {
  TSCD_DISPATCH(ch_dot_acc, a, b, hw, C, out);
}
void Kern<float>::bc_mul(const float* x, const float* v, std::size_t hw, int C, float* y) {
  TSCD_DISPATCH(bc_mul, x, v, hw, C, y);
}
void Kern<float>::bc_mul_acc(const float* x, const float* v, std::size_t hw, int C, float* y) {
  TSCD_DISPATCH(bc_mul_acc, x, v, hw, C, y);
}
void Kern<float>::bc_shift_scale(const float* x, const float* a, const float* m, std::size_t hw,
                                 int C, float* y) {
  TSCD_DISPATCH(bc_shift_scale, x, a, m, hw, C, y);
}
void Kern<float>::matmul(const float* A, const float* B, float* C, int M, int K, int N, bool ta,
                         bool tb, bool accumulate) {
  TSCD_DISPATCH(matmul, A, B, C, M, K, N, ta, tb, accumulate);
}

#undef TSCD_DISPATCH

}  // namespace tscd::kernels
