#pragma once

#include <string>

#include "tscd/nn/layers.hpp"

namespace tscd::nn {

enum class HeadMode { projection, logits };

// 1x1 convolution head. Projection mode emits 8 channels normalized to unit
// per-pixel norm; logit mode emits 2 unnormalized class scores.
template <typename T>
struct Head {
  HeadMode mode = HeadMode::projection;
  ag::Var<T> w, b;
  int out_channels = 0;

  void build(HeadMode m, int cin, int cout, Rng& rng) {
    mode = m;
    out_channels = cout;
    w = init_conv_weight<T>(1, cin, cout, rng);
    b = init_vector<T>(cout, T(0));
  }

  ag::Var<T> forward(const ag::Var<T>& x, HeadMode requested) {
    TSCD_CHECK(requested == mode, InvalidArgumentError, "head mode/params mismatch");
    ag::Var<T> y = ag::conv2d(x, w, b);
    if (mode == HeadMode::projection) return ag::l2norm_rows(y);
    return y;
  }

  void collect(Registry<T>& r, const std::string& p) {
    r.add_param(p + ".w", w);
    r.add_param(p + ".b", b);
  }
};

template <typename T>
ag::Var<T> head_forward(const ag::Var<T>& features, Head<T>& params, HeadMode mode) {
  return params.forward(features, mode);
}

}  // namespace tscd::nn
