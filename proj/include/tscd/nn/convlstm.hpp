#pragma once

#include <string>
#include <vector>

#include "tscd/nn/layers.hpp"

namespace tscd::nn {

template <typename T>
struct ConvLSTMState {
  ag::Var<T> hidden;
  ag::Var<T> cell;
};

// Convolutional LSTM cell. Gate pre-activations come from 3x3 convolutions of
// the input and hidden state; cell-state (peephole) terms enter as Hadamard
// products with per-channel weights.
template <typename T>
struct ConvLSTMParams {
  int in_channels = 0;
  int hidden = 0;
  // gate order everywhere: input, forget, cell, output
  ag::Var<T> w_xi, w_xf, w_xc, w_xo;
  ag::Var<T> w_hi, w_hf, w_hc, w_ho;
  ag::Var<T> peep_i, peep_f, peep_o;
  ag::Var<T> b_i, b_f, b_c, b_o;

  void build(int cin, int k, Rng& rng) {
    in_channels = cin;
    hidden = k;
    w_xi = init_conv_weight<T>(3, cin, k, rng);
    w_xf = init_conv_weight<T>(3, cin, k, rng);
    w_xc = init_conv_weight<T>(3, cin, k, rng);
    w_xo = init_conv_weight<T>(3, cin, k, rng);
    w_hi = init_conv_weight<T>(3, k, k, rng);
    w_hf = init_conv_weight<T>(3, k, k, rng);
    w_hc = init_conv_weight<T>(3, k, k, rng);
    w_ho = init_conv_weight<T>(3, k, k, rng);
    peep_i = init_vector<T>(k, T(0));
    peep_f = init_vector<T>(k, T(0));
    peep_o = init_vector<T>(k, T(0));
    b_i = init_vector<T>(k, T(0));
    b_f = init_vector<T>(k, T(1));  // forget gate starts open
    b_c = init_vector<T>(k, T(0));
    b_o = init_vector<T>(k, T(0));
  }

  void collect(Registry<T>& r, const std::string& p) {
    r.add_param(p + ".w_xi", w_xi);
    r.add_param(p + ".w_xf", w_xf);
    r.add_param(p + ".w_xc", w_xc);
    r.add_param(p + ".w_xo", w_xo);
    r.add_param(p + ".w_hi", w_hi);
    r.add_param(p + ".w_hf", w_hf);
    r.add_param(p + ".w_hc", w_hc);
    r.add_param(p + ".w_ho", w_ho);
    r.add_param(p + ".peep_i", peep_i);
    r.add_param(p + ".peep_f", peep_f);
    r.add_param(p + ".peep_o", peep_o);
    r.add_param(p + ".b_i", b_i);
    r.add_param(p + ".b_f", b_f);
    r.add_param(p + ".b_c", b_c);
    r.add_param(p + ".b_o", b_o);
  }
};

template <typename T>
ConvLSTMState<T> zero_state(int h, int w, int k) {
  return {ag::constant(Tensor<T>::zeros({h, w, k})), ag::constant(Tensor<T>::zeros({h, w, k}))};
}

// One recurrence step. Gate values stay in (0,1), hidden values in (-1,1).
template <typename T>
ConvLSTMState<T> convlstm_step(const ag::Var<T>& x, const ConvLSTMState<T>& state,
                               ConvLSTMParams<T>& p) {
  TSCD_CHECK(x.value().rank() == 3 && x.value().dim(2) == p.in_channels, ShapeMismatchError,
             "convlstm_step: input channel mismatch");
  TSCD_CHECK(state.hidden.value().dim(0) == x.value().dim(0) &&
                 state.hidden.value().dim(1) == x.value().dim(1) &&
                 state.hidden.value().dim(2) == p.hidden,
             ShapeMismatchError, "convlstm_step: state shape mismatch");
  const int k = p.hidden;
  // Fused 4-gate convolutions: one pass over x and one over h.
  ag::Var<T> wx = ag::concat_last<T>({p.w_xi, p.w_xf, p.w_xc, p.w_xo});
  ag::Var<T> wh = ag::concat_last<T>({p.w_hi, p.w_hf, p.w_hc, p.w_ho});
  ag::Var<T> bias = ag::concat_last<T>({p.b_i, p.b_f, p.b_c, p.b_o});
  ag::Var<T> pre = ag::add(ag::conv2d(x, wx, bias), ag::conv2d(state.hidden, wh));
  ag::Var<T> zi = ag::slice_last(pre, 0, k);
  ag::Var<T> zf = ag::slice_last(pre, k, 2 * k);
  ag::Var<T> zc = ag::slice_last(pre, 2 * k, 3 * k);
  ag::Var<T> zo = ag::slice_last(pre, 3 * k, 4 * k);
  ag::Var<T> gate_i = ag::sigmoid(ag::add(zi, ag::mul_bc(state.cell, p.peep_i)));
  ag::Var<T> gate_f = ag::sigmoid(ag::add(zf, ag::mul_bc(state.cell, p.peep_f)));
  ag::Var<T> cand = ag::tanh_(zc);
  ag::Var<T> cell = ag::add(ag::mul(gate_f, state.cell), ag::mul(gate_i, cand));
  ag::Var<T> gate_o = ag::sigmoid(ag::add(zo, ag::mul_bc(cell, p.peep_o)));
  ag::Var<T> hidden = ag::mul(gate_o, ag::tanh_(cell));
  return {hidden, cell};
}

// Bidirectional layer: independent forward/backward parameter sets combined by
// 1x1 convolutions under a tanh.
template <typename T>
struct BiConvLSTM {
  ConvLSTMParams<T> fwd, bwd;
  ag::Var<T> w_out_fwd, w_out_bwd, b_out;
  int hidden = 0;

  void build(int cin, int k, Rng& rng) {
    hidden = k;
    fwd.build(cin, k, rng);
    bwd.build(cin, k, rng);
    w_out_fwd = init_conv_weight<T>(1, k, k, rng);
    w_out_bwd = init_conv_weight<T>(1, k, k, rng);
    b_out = init_vector<T>(k, T(0));
  }

  std::vector<ag::Var<T>> forward(const std::vector<ag::Var<T>>& seq) {
    TSCD_CHECK(!seq.empty(), InvalidArgumentError, "bi_convlstm: empty sequence");
    const int n = static_cast<int>(seq.size());
    const int h = seq[0].value().dim(0), w = seq[0].value().dim(1);
    std::vector<ag::Var<T>> hf(n), hb(n);
    ConvLSTMState<T> s = zero_state<T>(h, w, hidden);
    for (int t = 0; t < n; ++t) {
      s = convlstm_step(seq[static_cast<std::size_t>(t)], s, fwd);
      hf[static_cast<std::size_t>(t)] = s.hidden;
    }
    s = zero_state<T>(h, w, hidden);
    for (int t = n - 1; t >= 0; --t) {
      s = convlstm_step(seq[static_cast<std::size_t>(t)], s, bwd);
      hb[static_cast<std::size_t>(t)] = s.hidden;
    }
    std::vector<ag::Var<T>> out(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      out[static_cast<std::size_t>(t)] =
          ag::tanh_(ag::add(ag::conv2d(hf[static_cast<std::size_t>(t)], w_out_fwd, b_out),
                            ag::conv2d(hb[static_cast<std::size_t>(t)], w_out_bwd)));
    }
    return out;
  }

  void collect(Registry<T>& r, const std::string& p) {
    fwd.collect(r, p + ".fwd");
    bwd.collect(r, p + ".bwd");
    r.add_param(p + ".w_out_fwd", w_out_fwd);
    r.add_param(p + ".w_out_bwd", w_out_bwd);
    r.add_param(p + ".b_out", b_out);
  }
};

}  // namespace tscd::nn
