#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tscd/ag/autograd.hpp"
#include "tscd/core/rng.hpp"

namespace tscd::nn {

template <typename T>
struct ParamRef {
  std::string name;
  ag::Var<T>* var;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* buf;
};

template <typename T>
struct Registry {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;
  void add_param(const std::string& name, ag::Var<T>& v) { params.push_back({name, &v}); }
  void add_buffer(const std::string& name, Tensor<T>& b) { buffers.push_back({name, &b}); }
};

// Kernels drawn uniform in +-1/sqrt(fan_in).
template <typename T>
ag::Var<T> init_conv_weight(int k, int cin, int cout, Rng& rng) {
  Tensor<T> w({k, k, cin, cout});
  const double bound = 1.0 / std::sqrt(static_cast<double>(k) * k * cin);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
  return ag::Var<T>(std::move(w), true);
}

template <typename T>
ag::Var<T> init_vector(int c, T value, bool requires_grad = true) {
  return ag::Var<T>(Tensor<T>::full({c}, value), requires_grad);
}

// Forward-mode switches shared by a whole network pass.
struct PassMode {
  bool training = true;        // batch stats vs running stats in BN
  bool update_running = true;  // whether BN updates its running stats
};

template <typename T>
struct BatchNorm {
  ag::Var<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  void build(int c) {
    gamma = init_vector<T>(c, T(1));
    beta = init_vector<T>(c, T(0));
    running_mean = Tensor<T>::zeros({c});
    running_var = Tensor<T>::full({c}, T(1));
  }

  ag::Var<T> forward(const ag::Var<T>& x, const PassMode& mode) {
    return ag::batchnorm(x, gamma, beta, running_mean, running_var, momentum, eps, mode.training,
                         mode.training && mode.update_running);
  }

  void collect(Registry<T>& r, const std::string& p) {
    r.add_param(p + ".gamma", gamma);
    r.add_param(p + ".beta", beta);
    r.add_buffer(p + ".running_mean", running_mean);
    r.add_buffer(p + ".running_var", running_var);
  }
};

// Conv + BN + ReLU.
template <typename T>
struct ConvUnit {
  ag::Var<T> w, b;
  BatchNorm<T> bn;
  int k = 3;

  void build(int kk, int cin, int cout, Rng& rng) {
    k = kk;
    w = init_conv_weight<T>(kk, cin, cout, rng);
    b = init_vector<T>(cout, T(0));
    bn.build(cout);
  }

  ag::Var<T> forward(const ag::Var<T>& x, const PassMode& mode) {
    return ag::relu(bn.forward(ag::conv2d(x, w, b), mode));
  }

  void collect(Registry<T>& r, const std::string& p) {
    r.add_param(p + ".w", w);
    r.add_param(p + ".b", b);
    bn.collect(r, p + ".bn");
  }
};

// Two convolution units plus an identity mapping; a 1x1 projection is used on
// the identity path when the channel count changes.
template <typename T>
struct ResUnit {
  ConvUnit<T> cu1, cu2;
  bool has_proj = false;
  ag::Var<T> proj_w, proj_b;

  void build(int cin, int cout, Rng& rng) {
    cu1.build(3, cin, cout, rng);
    cu2.build(3, cout, cout, rng);
    has_proj = (cin != cout);
    if (has_proj) {
      proj_w = init_conv_weight<T>(1, cin, cout, rng);
      proj_b = init_vector<T>(cout, T(0));
    }
  }

  ag::Var<T> forward(const ag::Var<T>& x, const PassMode& mode) {
    ag::Var<T> y = cu2.forward(cu1.forward(x, mode), mode);
    ag::Var<T> idn = has_proj ? ag::conv2d(x, proj_w, proj_b) : x;
    return ag::add(y, idn);
  }

  void collect(Registry<T>& r, const std::string& p) {
    cu1.collect(r, p + ".cu1");
    cu2.collect(r, p + ".cu2");
    if (has_proj) {
      r.add_param(p + ".proj_w", proj_w);
      r.add_param(p + ".proj_b", proj_b);
    }
  }
};

// Two residual units; downsampling blocks halve the grid with a 2x2 maxpool
// before the units so the whole network stays flip-equivariant away from the
// borders (stride-2 convs would shift the sampling grid under flips).
template <typename T>
struct ResBlock {
  ResUnit<T> u1, u2;
  bool downsample = false;

  void build(int cin, int cout, bool down, Rng& rng) {
    downsample = down;
    u1.build(cin, cout, rng);
    u2.build(cout, cout, rng);
  }

  ag::Var<T> forward(const ag::Var<T>& x, const PassMode& mode) {
    ag::Var<T> h = downsample ? ag::maxpool2(x) : x;
    return u2.forward(u1.forward(h, mode), mode);
  }

  void collect(Registry<T>& r, const std::string& p) {
    u1.collect(r, p + ".u1");
    u2.collect(r, p + ".u2");
  }
};

}  // namespace tscd::nn
