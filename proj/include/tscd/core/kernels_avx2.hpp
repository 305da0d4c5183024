#pragma once

#include <cstddef>
#include <cstdint>

// AVX2+FMA float kernels. Only call these when kernels::caps().avx2 is true.
// Semantics match kernels::ref exactly up to floating-point reassociation.
namespace tscd::kernels::avx2 {

void conv2d(const float* in, int H, int W, int Cin, const float* w, int k, const float* bias,
            float* out, int Cout, bool accumulate);
void conv2d_wgrad(const float* in, int H, int W, int Cin, const float* dout, int k, float* dw,
                  int Cout);

void relu(const float* x, float* y, std::size_t n);
void relu_bwd(const float* y, const float* dy, float* dx, std::size_t n);
void sigmoid(const float* x, float* y, std::size_t n);
void sigmoid_bwd(const float* y, const float* dy, float* dx, std::size_t n);
void tanh_fwd(const float* x, float* y, std::size_t n);
void tanh_bwd(const float* y, const float* dy, float* dx, std::size_t n);
void vexp(const float* x, float* y, std::size_t n);

void add(const float* a, const float* b, float* y, std::size_t n);
void sub(const float* a, const float* b, float* y, std::size_t n);
void mul(const float* a, const float* b, float* y, std::size_t n);
void fma_acc(const float* a, const float* b, float* y, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void scale(float alpha, const float* x, float* y, std::size_t n);

void ch_sum(const float* x, std::size_t hw, int C, float* out, bool accumulate);
void ch_dot_acc(const float* a, const float* b, std::size_t hw, int C, float* out);
void bc_mul(const float* x, const float* v, std::size_t hw, int C, float* y);
void bc_mul_acc(const float* x, const float* v, std::size_t hw, int C, float* y);
void bc_shift_scale(const float* x, const float* a, const float* m, std::size_t hw, int C,
                    float* y);

void matmul(const float* A, const float* B, float* C, int M, int K, int N, bool ta, bool tb,
            bool accumulate);

}  // namespace tscd::kernels::avx2
