#pragma once

#include <cstddef>
#include <cstdint>

#include "tscd/core/kernels_ref.hpp"

// Runtime-dispatched kernel entry points. Float traffic goes through the AVX2
// variants when the CPU supports AVX2+FMA (override with TSCD_FORCE_SCALAR=1);
// double always uses the scalar reference kernels.
namespace tscd::kernels {

struct Caps {
  bool avx2 = false;
};

// Detected once at first use.
const Caps& caps();
bool using_avx2();

template <typename T>
struct Kern {
  static void conv2d(const T* in, int H, int W, int Cin, const T* w, int k, const T* bias,
                     T* out, int Cout, bool accumulate) {
    ref::conv2d(in, H, W, Cin, w, k, bias, out, Cout, accumulate);
  }
  static void conv2d_wgrad(const T* in, int H, int W, int Cin, const T* dout, int k, T* dw,
                           int Cout) {
    ref::conv2d_wgrad(in, H, W, Cin, dout, k, dw, Cout);
  }
  static void maxpool2(const T* in, int H, int W, int C, T* out, std::uint8_t* arg) {
    ref::maxpool2(in, H, W, C, out, arg);
  }
  static void maxpool2_bwd(const T* dout, int Ho, int Wo, int C, const std::uint8_t* arg, T* din) {
    ref::maxpool2_bwd(dout, Ho, Wo, C, arg, din);
  }
  static void upsample2(const T* in, int H, int W, int C, T* out) { ref::upsample2(in, H, W, C, out); }
  static void upsample2_bwd(const T* dout, int Ho, int Wo, int C, T* din) {
    ref::upsample2_bwd(dout, Ho, Wo, C, din);
  }
  static void relu(const T* x, T* y, std::size_t n) { ref::relu(x, y, n); }
  static void relu_bwd(const T* y, const T* dy, T* dx, std::size_t n) { ref::relu_bwd(y, dy, dx, n); }
  static void sigmoid(const T* x, T* y, std::size_t n) { ref::sigmoid(x, y, n); }
  static void sigmoid_bwd(const T* y, const T* dy, T* dx, std::size_t n) { ref::sigmoid_bwd(y, dy, dx, n); }
  static void tanh_fwd(const T* x, T* y, std::size_t n) { ref::tanh_fwd(x, y, n); }
  static void tanh_bwd(const T* y, const T* dy, T* dx, std::size_t n) { ref::tanh_bwd(y, dy, dx, n); }
  static void vexp(const T* x, T* y, std::size_t n) { ref::vexp(x, y, n); }
  static void vlog(const T* x, T* y, std::size_t n) { ref::vlog(x, y, n); }
  static void add(const T* a, const T* b, T* y, std::size_t n) { ref::add(a, b, y, n); }
  static void sub(const T* a, const T* b, T* y, std::size_t n) { ref::sub(a, b, y, n); }
  static void mul(const T* a, const T* b, T* y, std::size_t n) { ref::mul(a, b, y, n); }
  static void fma_acc(const T* a, const T* b, T* y, std::size_t n) { ref::fma_acc(a, b, y, n); }
  static void axpy(T alpha, const T* x, T* y, std::size_t n) { ref::axpy(alpha, x, y, n); }
  static void scale(T alpha, const T* x, T* y, std::size_t n) { ref::scale(alpha, x, y, n); }
  static void div_acc(const T* dy, const T* x, T* dx, std::size_t n) { ref::div_acc(dy, x, dx, n); }
  static void ch_sum(const T* x, std::size_t hw, int C, T* out, bool accumulate) {
    ref::ch_sum(x, hw, C, out, accumulate);
  }
  static void ch_dot_acc(const T* a, const T* b, std::size_t hw, int C, T* out) {
    ref::ch_dot_acc(a, b, hw, C, out);
  }
  static void bc_mul(const T* x, const T* v, std::size_t hw, int C, T* y) { ref::bc_mul(x, v, hw, C, y); }
  static void bc_mul_acc(const T* x, const T* v, std::size_t hw, int C, T* y) {
    ref::bc_mul_acc(x, v, hw, C, y);
  }
  static void bc_shift_scale(const T* x, const T* a, const T* m, std::size_t hw, int C, T* y) {
    ref::bc_shift_scale(x, a, m, hw, C, y);
  }
  static double reduce_sum(const T* x, std::size_t n) { return ref::reduce_sum(x, n); }
  static double dot(const T* a, const T* b, std::size_t n) { return ref::dot(a, b, n); }
  static void matmul(const T* A, const T* B, T* C, int M, int K, int N, bool ta, bool tb,
                     bool accumulate) {
    ref::matmul(A, B, C, M, K, N, ta, tb, accumulate);
  }
};

// Float specialization dispatches to AVX2 at runtime (see kernels.cpp).
template <>
struct Kern<float> {
  static void conv2d(const float* in, int H, int W, int Cin, const float* w, int k,
                     const float* bias, float* out, int Cout, bool accumulate);
  static void conv2d_wgrad(const float* in, int H, int W, int Cin, const float* dout, int k,
                           float* dw, int Cout);
  static void maxpool2(const float* in, int H, int W, int C, float* out, std::uint8_t* arg) {
    ref::maxpool2(in, H, W, C, out, arg);
  }
  static void maxpool2_bwd(const float* dout, int Ho, int Wo, int C, const std::uint8_t* arg,
                           float* din) {
    ref::maxpool2_bwd(dout, Ho, Wo, C, arg, din);
  }
  static void upsample2(const float* in, int H, int W, int C, float* out) {
    ref::upsample2(in, H, W, C, out);
  }
  static void upsample2_bwd(const float* dout, int Ho, int Wo, int C, float* din) {
    ref::upsample2_bwd(dout, Ho, Wo, C, din);
  }
  static void relu(const float* x, float* y, std::size_t n);
  static void relu_bwd(const float* y, const float* dy, float* dx, std::size_t n);
  static void sigmoid(const float* x, float* y, std::size_t n);
  static void sigmoid_bwd(const float* y, const float* dy, float* dx, std::size_t n);
  static void tanh_fwd(const float* x, float* y, std::size_t n);
  static void tanh_bwd(const float* y, const float* dy, float* dx, std::size_t n);
  static void vexp(const float* x, float* y, std::size_t n);
  static void vlog(const float* x, float* y, std::size_t n) { ref::vlog(x, y, n); }
  static void add(const float* a, const float* b, float* y, std::size_t n);
  static void sub(const float* a, const float* b, float* y, std::size_t n);
  static void mul(const float* a, const float* b, float* y, std::size_t n);
  static void fma_acc(const float* a, const float* b, float* y, std::size_t n);
  static void axpy(float alpha, const float* x, float* y, std::size_t n);
  static void scale(float alpha, const float* x, float* y, std::size_t n);
  static void div_acc(const float* dy, const float* x, float* dx, std::size_t n) {
    ref::div_acc(dy, x, dx, n);
  }
  static void ch_sum(const float* x, std::size_t hw, int C, float* out, bool accumulate);
  static void ch_dot_acc(const float* a, const float* b, std::size_t hw, int C, float* out);
  static void bc_mul(const float* x, const float* v, std::size_t hw, int C, float* y);
  static void bc_mul_acc(const float* x, const float* v, std::size_t hw, int C, float* y);
  static void bc_shift_scale(const float* x, const float* a, const float* m, std::size_t hw,
                             int C, float* y);
  static double reduce_sum(const float* x, std::size_t n) { return ref::reduce_sum(x, n); }
  static double dot(const float* a, const float* b, std::size_t n) { return ref::dot(a, b, n); }
  static void matmul(const float* A, const float* B, float* C, int M, int K, int N, bool ta,
                     bool tb, bool accumulate);
};

}  // namespace tscd::kernels
