#pragma once

#include <cstdint>
#include <string>

#include "tscd/nn/layers.hpp"

namespace tscd::nn {

// Siamese-concatenation residual Unet. One encoder weight set applied to both
// images of a change pair; the decoder consumes the concatenated skip
// features of both streams.
//
// Channel plan for base width B (the default B=32 gives 32/32/64/128 encoder,
// 256 bridge and 128 decoder channels):
//   Conv1 B (full res) -> maxpool /2 -> ResBlk1 B -> ResBlk2 2B /4
//   -> ResBlk3 4B /8 -> Bridge 8B on both streams concatenated, then three
//   x2 upsamplings against DecBlk1..3 (each 4B) with skip concatenations.
struct UnetConfig {
  int in_channels = 4;
  int base_width = 32;
  int feature_dim() const { return 4 * base_width; }
};

template <typename T>
struct Unet {
  UnetConfig cfg;
  ConvUnit<T> conv1;
  ResBlock<T> rb1, rb2, rb3;
  ConvUnit<T> bridge;
  ConvUnit<T> dec1, dec2, dec3;

  void build(const UnetConfig& c, Rng& rng) {
    cfg = c;
    const int b = c.base_width;
    conv1.build(3, c.in_channels, b, rng);
    rb1.build(b, b, false, rng);
    rb2.build(b, 2 * b, true, rng);
    rb3.build(2 * b, 4 * b, true, rng);
    bridge.build(3, 8 * b, 8 * b, rng);
    dec1.build(3, 8 * b + 2 * (2 * b), 4 * b, rng);
    dec2.build(3, 4 * b + 2 * b, 4 * b, rng);
    dec3.build(3, 4 * b + 2 * b, 4 * b, rng);
  }

  struct EncoderOut {
    ag::Var<T> c1, r1, r2, r3;
  };

  EncoderOut encode(const ag::Var<T>& img, const PassMode& mode) {
    EncoderOut e;
    e.c1 = conv1.forward(img, mode);
    ag::Var<T> p = ag::maxpool2(e.c1);
    e.r1 = rb1.forward(p, mode);
    e.r2 = rb2.forward(e.r1, mode);
    e.r3 = rb3.forward(e.r2, mode);
    return e;
  }

  // anchor/target are H x W x C with H, W divisible by 16.
  ag::Var<T> forward(const ag::Var<T>& anchor, const ag::Var<T>& target, const PassMode& mode) {
    const auto& s = anchor.value().shape();
    TSCD_CHECK(anchor.value().rank() == 3 && target.value().rank() == 3 &&
                   anchor.value().same_shape(target.value()),
               ShapeMismatchError, "unet: anchor/target shape mismatch");
    TSCD_CHECK(s[0] % 16 == 0 && s[1] % 16 == 0, InvalidArgumentError,
               "invalid input size: spatial dims must be divisible by 16");
    TSCD_CHECK(s[2] == cfg.in_channels, ChannelMismatchError, "unet: channel count mismatch");
    EncoderOut ea = encode(anchor, mode);
    EncoderOut eb = encode(target, mode);
    ag::Var<T> bb = ag::upsample2(bridge.forward(ag::concat_last<T>({ea.r3, eb.r3}), mode));
    ag::Var<T> d1 = ag::upsample2(dec1.forward(ag::concat_last<T>({bb, ea.r2, eb.r2}), mode));
    ag::Var<T> d2 = ag::upsample2(dec2.forward(ag::concat_last<T>({d1, ea.r1, eb.r1}), mode));
    return dec3.forward(ag::concat_last<T>({d2, ea.c1, eb.c1}), mode);
  }

  void collect(Registry<T>& r, const std::string& p) {
    conv1.collect(r, p + ".conv1");
    rb1.collect(r, p + ".rb1");
    rb2.collect(r, p + ".rb2");
    rb3.collect(r, p + ".rb3");
    bridge.collect(r, p + ".bridge");
    dec1.collect(r, p + ".dec1");
    dec2.collect(r, p + ".dec2");
    dec3.collect(r, p + ".dec3");
  }
};

template <typename T>
std::int64_t count_parameters(Unet<T>& net) {
  Registry<T> r;
  net.collect(r, "unet");
  std::int64_t n = 0;
  for (auto& pr : r.params) n += static_cast<std::int64_t>(pr.var->value().size());
  return n;
}

}  // namespace tscd::nn
