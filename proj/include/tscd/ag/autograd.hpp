#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "tscd/core/error.hpp"
#include "tscd/core/kernels.hpp"
#include "tscd/core/tensor.hpp"

// Tape-based reverse-mode autodiff over dense tensors. Ops record a backward
// closure that pulls the node's gradient into its parents; backward() runs a
// reverse topological sweep from a scalar root. Templated on the scalar type
// so the same graph code runs in float for training and double for
// finite-difference checks.
namespace tscd::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void()> backward_fn;
  bool requires_grad = false;
  int mark = 0;

  Tensor<T>& ensure_grad() {
    if (grad.size() == 0) grad = Tensor<T>::zeros(value.shape());
    return grad;
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

inline thread_local bool g_grad_enabled = true;

struct NoGrad {
  bool prev;
  NoGrad() : prev(g_grad_enabled) { g_grad_enabled = false; }
  ~NoGrad() { g_grad_enabled = prev; }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> v, bool requires_grad = false) : n_(std::make_shared<Node<T>>()) {
    n_->value = std::move(v);
    n_->requires_grad = requires_grad;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Tensor<T>& value() const { return n_->value; }
  Tensor<T>& value_mut() { return n_->value; }
  const std::vector<int>& shape() const { return n_->value.shape(); }
  Tensor<T>& grad() { return n_->ensure_grad(); }
  bool has_grad() const { return n_ && n_->grad.size() > 0; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  void zero_grad() {
    if (n_ && n_->grad.size()) n_->grad.fill(T(0));
  }
  NodePtr<T> node() const { return n_; }

  T item() const {
    TSCD_CHECK(n_ && n_->value.size() == 1, InvalidArgumentError, "item() needs a scalar");
    return n_->value[0];
  }

  void backward() {
    TSCD_CHECK(n_ && n_->value.size() == 1, InvalidArgumentError,
               "backward() requires a scalar root");
    std::vector<Node<T>*> order;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.push_back({n_.get(), 0});
    n_->mark = 1;
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node<T>* p = node->parents[idx++].get();
        if (p->mark == 0 && p->requires_grad) {
          p->mark = 1;
          stack.push_back({p, 0});
        }
      } else {
        node->mark = 2;
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad()[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn();
    }
    for (Node<T>* node : order) node->mark = 0;
  }

 private:
  NodePtr<T> n_;
};

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<Var<T>> vs) {
  for (const auto& v : vs)
    if (v.defined() && v.node()->requires_grad) return true;
  return false;
}

}  // namespace detail

// Builds an op node. `bwd` is invoked with the completed node so it can read
// node->grad and accumulate into the captured parents.
template <typename T, typename F>
Var<T> make_op(Tensor<T> out, std::initializer_list<Var<T>> inputs, F&& bwd_builder) {
  Var<T> r(std::move(out), false);
  if (!g_grad_enabled || !detail::any_requires_grad(inputs)) return r;
  NodePtr<T> n = r.node();
  n->requires_grad = true;
  for (const auto& v : inputs)
    if (v.defined()) n->parents.push_back(v.node());
  n->backward_fn = bwd_builder(n.get());
  return r;
}

template <typename T>
Var<T> constant(Tensor<T> v) {
  return Var<T>(std::move(v), false);
}

using kernels::Kern;

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  TSCD_CHECK(a.value().same_shape(b.value()), ShapeMismatchError, "add: shape mismatch");
  Tensor<T> out(a.shape());
  Kern<T>::add(a.value().data(), b.value().data(), out.data(), out.size());
  auto an = a.node(), bn = b.node();
  return make_op<T>(std::move(out), {a, b}, [an, bn](Node<T>* n) {
    return [an, bn, n]() {
      const std::size_t m = n->grad.size();
      if (an->requires_grad) Kern<T>::axpy(T(1), n->grad.data(), an->ensure_grad().data(), m);
      if (bn->requires_grad) Kern<T>::axpy(T(1), n->grad.data(), bn->ensure_grad().data(), m);
    };
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  TSCD_CHECK(a.value().same_shape(b.value()), ShapeMismatchError, "sub: shape mismatch");
  Tensor<T> out(a.shape());
  Kern<T>::sub(a.value().data(), b.value().data(), out.data(), out.size());
  auto an = a.node(), bn = b.node();
  return make_op<T>(std::move(out), {a, b}, [an, bn](Node<T>* n) {
    return [an, bn, n]() {
      const std::size_t m = n->grad.size();
      if (an->requires_grad) Kern<T>::axpy(T(1), n->grad.data(), an->ensure_grad().data(), m);
      if (bn->requires_grad) Kern<T>::axpy(T(-1), n->grad.data(), bn->ensure_grad().data(), m);
    };
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  TSCD_CHECK(a.value().same_shape(b.value()), ShapeMismatchError, "mul: shape mismatch");
  Tensor<T> out(a.shape());
  Kern<T>::mul(a.value().data(), b.value().data(), out.data(), out.size());
  auto an = a.node(), bn = b.node();
  return make_op<T>(std::move(out), {a, b}, [an, bn](Node<T>* n) {
    return [an, bn, n]() {
      const std::size_t m = n->grad.size();
      if (an->requires_grad) Kern<T>::fma_acc(n->grad.data(), bn->value.data(), an->ensure_grad().data(), m);
      if (bn->requires_grad) Kern<T>::fma_acc(n->grad.data(), an->value.data(), bn->ensure_grad().data(), m);
    };
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T alpha) {
  Tensor<T> out(x.shape());
  Kern<T>::scale(alpha, x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, alpha](Node<T>* n) {
    return [xn, alpha, n]() {
      Kern<T>::axpy(alpha, n->grad.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return scale(x, T(-1));
}

// Elementwise multiply by a constant tensor (no gradient to the constant).
template <typename T>
Var<T> mulc(const Var<T>& x, Tensor<T> m) {
  TSCD_CHECK(x.value().same_shape(m), ShapeMismatchError, "mulc: shape mismatch");
  Tensor<T> out(x.shape());
  Kern<T>::mul(x.value().data(), m.data(), out.data(), out.size());
  auto xn = x.node();
  auto mk = std::make_shared<Tensor<T>>(std::move(m));
  return make_op<T>(std::move(out), {x}, [xn, mk](Node<T>* n) {
    return [xn, mk, n]() {
      Kern<T>::fma_acc(n->grad.data(), mk->data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

// x + constant tensor of the same shape.
template <typename T>
Var<T> addc(const Var<T>& x, const Tensor<T>& m) {
  TSCD_CHECK(x.value().same_shape(m), ShapeMismatchError, "addc: shape mismatch");
  Tensor<T> out(x.shape());
  Kern<T>::add(x.value().data(), m.data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() { Kern<T>::axpy(T(1), n->grad.data(), xn->ensure_grad().data(), n->grad.size()); };
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  Kern<T>::relu(x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      Kern<T>::relu_bwd(n->value.data(), n->grad.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  Kern<T>::sigmoid(x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      Kern<T>::sigmoid_bwd(n->value.data(), n->grad.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

template <typename T>
Var<T> tanh_(const Var<T>& x) {
  Tensor<T> out(x.shape());
  Kern<T>::tanh_fwd(x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      Kern<T>::tanh_bwd(n->value.data(), n->grad.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

template <typename T>
Var<T> exp_(const Var<T>& x) {
  Tensor<T> out(x.shape());
  Kern<T>::vexp(x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      Kern<T>::fma_acc(n->grad.data(), n->value.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

template <typename T>
Var<T> log_(const Var<T>& x) {
  Tensor<T> out(x.shape());
  Kern<T>::vlog(x.value().data(), out.data(), out.size());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      Kern<T>::div_acc(n->grad.data(), xn->value.data(), xn->ensure_grad().data(), n->grad.size());
    };
  });
}

// ---------------------------------------------------------------------------
// Convolution / pooling / resampling (rank-3 H x W x C)
// ---------------------------------------------------------------------------

// Same-padding stride-1 convolution; w is [k, k, Cin, Cout], b is [Cout] or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  TSCD_CHECK(x.value().rank() == 3, ShapeMismatchError, "conv2d: input must be rank 3");
  TSCD_CHECK(w.value().rank() == 4, ShapeMismatchError, "conv2d: weights must be rank 4");
  const int H = x.value().dim(0), W = x.value().dim(1), Cin = x.value().dim(2);
  const int k = w.value().dim(0), Cout = w.value().dim(3);
  TSCD_CHECK(w.value().dim(1) == k && w.value().dim(2) == Cin, ShapeMismatchError,
             "conv2d: weight shape mismatch");
  if (b.defined())
    TSCD_CHECK(b.value().size() == static_cast<std::size_t>(Cout), ShapeMismatchError,
               "conv2d: bias size mismatch");
  Tensor<T> out({H, W, Cout});
  Kern<T>::conv2d(x.value().data(), H, W, Cin, w.value().data(), k,
                  b.defined() ? b.value().data() : nullptr, out.data(), Cout, false);
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  return make_op<T>(std::move(out), b.defined() ? std::initializer_list<Var<T>>{x, w, b}
                                                : std::initializer_list<Var<T>>{x, w},
                    [xn, wn, bn, H, W, Cin, k, Cout](Node<T>* n) {
                      return [xn, wn, bn, H, W, Cin, k, Cout, n]() {
                        const Tensor<T>& g = n->grad;
                        if (bn && bn->requires_grad)
                          Kern<T>::ch_sum(g.data(), static_cast<std::size_t>(H) * W, Cout,
                                          bn->ensure_grad().data(), true);
                        if (wn->requires_grad)
                          Kern<T>::conv2d_wgrad(xn->value.data(), H, W, Cin, g.data(), k,
                                                wn->ensure_grad().data(), Cout);
                        if (xn->requires_grad) {
                          // dIn = conv(dOut, wT) with wT[dy,dx,co,ci] = w[k-1-dy,k-1-dx,ci,co]
                          Tensor<T> wt({k, k, Cout, Cin});
                          const Tensor<T>& wv = wn->value;
                          for (int dy = 0; dy < k; ++dy)
                            for (int dx = 0; dx < k; ++dx) {
                              const T* src = wv.data() +
                                             ((static_cast<std::size_t>(k - 1 - dy) * k +
                                               (k - 1 - dx)) * Cin) * Cout;
                              T* dst = wt.data() + ((static_cast<std::size_t>(dy) * k + dx) * Cout) * Cin;
                              for (int ci = 0; ci < Cin; ++ci)
                                for (int co = 0; co < Cout; ++co)
                                  dst[static_cast<std::size_t>(co) * Cin + ci] =
                                      src[static_cast<std::size_t>(ci) * Cout + co];
                            }
                          Kern<T>::conv2d(g.data(), H, W, Cout, wt.data(), k, nullptr,
                                          xn->ensure_grad().data(), Cin, true);
                        }
                      };
                    });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w) {
  return conv2d(x, w, Var<T>());
}

template <typename T>
Var<T> maxpool2(const Var<T>& x) {
  const int H = x.value().dim(0), W = x.value().dim(1), C = x.value().dim(2);
  TSCD_CHECK(H % 2 == 0 && W % 2 == 0, InvalidArgumentError, "maxpool2: odd spatial size");
  Tensor<T> out({H / 2, W / 2, C});
  auto arg = std::make_shared<std::vector<std::uint8_t>>(out.size());
  Kern<T>::maxpool2(x.value().data(), H, W, C, out.data(), arg->data());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, arg, H, W, C](Node<T>* n) {
    return [xn, arg, H, W, C, n]() {
      Kern<T>::maxpool2_bwd(n->grad.data(), H / 2, W / 2, C, arg->data(), xn->ensure_grad().data());
    };
  });
}

template <typename T>
Var<T> upsample2(const Var<T>& x) {
  const int H = x.value().dim(0), W = x.value().dim(1), C = x.value().dim(2);
  Tensor<T> out({2 * H, 2 * W, C});
  Kern<T>::upsample2(x.value().data(), H, W, C, out.data());
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, H, W, C](Node<T>* n) {
    return [xn, H, W, C, n]() {
      Kern<T>::upsample2_bwd(n->grad.data(), 2 * H, 2 * W, C, xn->ensure_grad().data());
    };
  });
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

// Concatenation along the last axis; all inputs share the leading axes.
template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& xs) {
  TSCD_CHECK(!xs.empty(), InvalidArgumentError, "concat_last: empty input list");
  const int rank = xs[0].value().rank();
  std::size_t rows = 1;
  for (int i = 0; i + 1 < rank; ++i) rows *= static_cast<std::size_t>(xs[0].value().dim(i));
  int total = 0;
  for (const auto& v : xs) {
    TSCD_CHECK(v.value().rank() == rank, ShapeMismatchError, "concat_last: rank mismatch");
    for (int i = 0; i + 1 < rank; ++i)
      TSCD_CHECK(v.value().dim(i) == xs[0].value().dim(i), ShapeMismatchError,
                 "concat_last: leading dim mismatch");
    total += v.value().dim(rank - 1);
  }
  std::vector<int> shape = xs[0].value().shape();
  shape[rank - 1] = total;
  Tensor<T> out(shape);
  std::vector<int> widths;
  {
    int off = 0;
    for (const auto& v : xs) {
      const int c = v.value().dim(rank - 1);
      widths.push_back(c);
      const T* src = v.value().data();
      for (std::size_t r = 0; r < rows; ++r) {
        T* dst = out.data() + r * total + off;
        const T* s = src + r * c;
        for (int j = 0; j < c; ++j) dst[j] = s[j];
      }
      off += c;
    }
  }
  std::vector<NodePtr<T>> ns;
  for (const auto& v : xs) ns.push_back(v.node());
  Var<T> r(std::move(out), false);
  if (!g_grad_enabled) return r;
  bool need = false;
  for (const auto& nn : ns) need |= nn->requires_grad;
  if (!need) return r;
  NodePtr<T> n = r.node();
  n->requires_grad = true;
  for (auto& nn : ns) n->parents.push_back(nn);
  Node<T>* np = n.get();
  n->backward_fn = [ns, widths, rows, total, np]() {
    int off = 0;
    for (std::size_t idx = 0; idx < ns.size(); ++idx) {
      const int c = widths[idx];
      if (ns[idx]->requires_grad) {
        T* dst = ns[idx]->ensure_grad().data();
        for (std::size_t r2 = 0; r2 < rows; ++r2) {
          const T* g = np->grad.data() + r2 * total + off;
          T* d = dst + r2 * c;
          for (int j = 0; j < c; ++j) d[j] += g[j];
        }
      }
      off += c;
    }
  };
  return r;
}

// Slice [c0, c1) of the last axis.
template <typename T>
Var<T> slice_last(const Var<T>& x, int c0, int c1) {
  const int rank = x.value().rank();
  const int C = x.value().dim(rank - 1);
  TSCD_CHECK(0 <= c0 && c0 < c1 && c1 <= C, InvalidArgumentError, "slice_last: bad range");
  std::size_t rows = 1;
  for (int i = 0; i + 1 < rank; ++i) rows *= static_cast<std::size_t>(x.value().dim(i));
  std::vector<int> shape = x.value().shape();
  shape[rank - 1] = c1 - c0;
  Tensor<T> out(shape);
  const int c = c1 - c0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* s = x.value().data() + r * C + c0;
    T* d = out.data() + r * c;
    for (int j = 0; j < c; ++j) d[j] = s[j];
  }
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, rows, C, c0, c](Node<T>* n) {
    return [xn, rows, C, c0, c, n]() {
      T* dst = xn->ensure_grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* g = n->grad.data() + r * c;
        T* d = dst + r * C + c0;
        for (int j = 0; j < c; ++j) d[j] += g[j];
      }
    };
  });
}

// Gathers pixel vectors from an H x W x C map into an [N, C] matrix.
template <typename T>
Var<T> gather_pixels(const Var<T>& x, std::vector<int> flat_idx) {
  TSCD_CHECK(x.value().rank() == 3, ShapeMismatchError, "gather_pixels: rank 3 required");
  const int C = x.value().dim(2);
  const std::size_t hw = static_cast<std::size_t>(x.value().dim(0)) * x.value().dim(1);
  const int N = static_cast<int>(flat_idx.size());
  Tensor<T> out({N, C});
  for (int i = 0; i < N; ++i) {
    const int p = flat_idx[static_cast<std::size_t>(i)];
    TSCD_CHECK(p >= 0 && static_cast<std::size_t>(p) < hw, InvalidArgumentError,
               "gather_pixels: index out of range");
    const T* s = x.value().data() + static_cast<std::size_t>(p) * C;
    T* d = out.row(i);
    for (int j = 0; j < C; ++j) d[j] = s[j];
  }
  auto xn = x.node();
  auto idx = std::make_shared<std::vector<int>>(std::move(flat_idx));
  return make_op<T>(std::move(out), {x}, [xn, idx, C](Node<T>* n) {
    return [xn, idx, C, n]() {
      T* dst = xn->ensure_grad().data();
      for (std::size_t i = 0; i < idx->size(); ++i) {
        const T* g = n->grad.data() + i * C;
        T* d = dst + static_cast<std::size_t>((*idx)[i]) * C;
        for (int j = 0; j < C; ++j) d[j] += g[j];
      }
    };
  });
}

// Stacks rank-2 blocks along rows.
template <typename T>
Var<T> cat_rows(const Var<T>& a, const Var<T>& b) {
  TSCD_CHECK(a.value().rank() == 2 && b.value().rank() == 2 && a.value().dim(1) == b.value().dim(1),
             ShapeMismatchError, "cat_rows: shape mismatch");
  const int Na = a.value().dim(0), Nb = b.value().dim(0), C = a.value().dim(1);
  Tensor<T> out({Na + Nb, C});
  std::copy(a.value().data(), a.value().data() + a.value().size(), out.data());
  std::copy(b.value().data(), b.value().data() + b.value().size(), out.data() + a.value().size());
  auto an = a.node(), bn = b.node();
  return make_op<T>(std::move(out), {a, b}, [an, bn, Na, Nb, C](Node<T>* n) {
    return [an, bn, Na, Nb, C, n]() {
      const std::size_t sa = static_cast<std::size_t>(Na) * C;
      if (an->requires_grad) Kern<T>::axpy(T(1), n->grad.data(), an->ensure_grad().data(), sa);
      if (bn->requires_grad)
        Kern<T>::axpy(T(1), n->grad.data() + sa, bn->ensure_grad().data(),
                      static_cast<std::size_t>(Nb) * C);
    };
  });
}

// ---------------------------------------------------------------------------
// Per-channel broadcast ops (rank-3 x, rank-1 v over the channel axis)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> mul_bc(const Var<T>& x, const Var<T>& v) {
  const int C = x.value().dim(x.value().rank() - 1);
  TSCD_CHECK(v.value().size() == static_cast<std::size_t>(C), ShapeMismatchError,
             "mul_bc: channel mismatch");
  const std::size_t hw = x.value().size() / static_cast<std::size_t>(C);
  Tensor<T> out(x.shape());
  Kern<T>::bc_mul(x.value().data(), v.value().data(), hw, C, out.data());
  auto xn = x.node(), vn = v.node();
  return make_op<T>(std::move(out), {x, v}, [xn, vn, hw, C](Node<T>* n) {
    return [xn, vn, hw, C, n]() {
      if (xn->requires_grad)
        Kern<T>::bc_mul_acc(n->grad.data(), vn->value.data(), hw, C, xn->ensure_grad().data());
      if (vn->requires_grad)
        Kern<T>::ch_dot_acc(n->grad.data(), xn->value.data(), hw, C, vn->ensure_grad().data());
    };
  });
}

template <typename T>
Var<T> add_bc(const Var<T>& x, const Var<T>& v) {
  const int C = x.value().dim(x.value().rank() - 1);
  TSCD_CHECK(v.value().size() == static_cast<std::size_t>(C), ShapeMismatchError,
             "add_bc: channel mismatch");
  const std::size_t hw = x.value().size() / static_cast<std::size_t>(C);
  Tensor<T> out(x.shape());
  for (std::size_t p = 0; p < hw; ++p) {
    const T* r = x.value().data() + p * C;
    T* o = out.data() + p * C;
    const T* vv = v.value().data();
    for (int c = 0; c < C; ++c) o[c] = r[c] + vv[c];
  }
  auto xn = x.node(), vn = v.node();
  return make_op<T>(std::move(out), {x, v}, [xn, vn, hw, C](Node<T>* n) {
    return [xn, vn, hw, C, n]() {
      if (xn->requires_grad)
        Kern<T>::axpy(T(1), n->grad.data(), xn->ensure_grad().data(), n->grad.size());
      if (vn->requires_grad)
        Kern<T>::ch_sum(n->grad.data(), hw, C, vn->ensure_grad().data(), true);
    };
  });
}

// ---------------------------------------------------------------------------
// Row-structured ops (rank-2 matrices) and reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta = false, bool tb = false) {
  TSCD_CHECK(a.value().rank() == 2 && b.value().rank() == 2, ShapeMismatchError,
             "matmul: rank-2 operands required");
  const int M = ta ? a.value().dim(1) : a.value().dim(0);
  const int K = ta ? a.value().dim(0) : a.value().dim(1);
  const int Kb = tb ? b.value().dim(1) : b.value().dim(0);
  const int N = tb ? b.value().dim(0) : b.value().dim(1);
  TSCD_CHECK(K == Kb, ShapeMismatchError, "matmul: inner dim mismatch");
  Tensor<T> out({M, N});
  Kern<T>::matmul(a.value().data(), b.value().data(), out.data(), M, K, N, ta, tb, false);
  auto an = a.node(), bn = b.node();
  return make_op<T>(std::move(out), {a, b}, [an, bn, M, K, N, ta, tb](Node<T>* n) {
    return [an, bn, M, K, N, ta, tb, n]() {
      const Tensor<T>& g = n->grad;
      TSCD_CHECK(!ta, InvalidArgumentError, "matmul backward: ta unsupported");
      if (an->requires_grad) {
        // dA += tb ? dC*B : dC*B^T
        Kern<T>::matmul(g.data(), bn->value.data(), an->ensure_grad().data(), M, N, K, false, !tb,
                        true);
      }
      if (bn->requires_grad) {
        if (!tb) {
          // dB += A^T * dC
          Kern<T>::matmul(an->value.data(), g.data(), bn->ensure_grad().data(), K, M, N, true,
                          false, true);
        } else {
          // dB += dC^T * A
          Kern<T>::matmul(g.data(), an->value.data(), bn->ensure_grad().data(), N, M, K, true,
                          false, true);
        }
      }
    };
  });
}

// Row-wise softmax with internal max subtraction.
template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  TSCD_CHECK(x.value().rank() == 2, ShapeMismatchError, "softmax_rows: rank-2 required");
  const int N = x.value().dim(0), M = x.value().dim(1);
  Tensor<T> out({N, M});
  for (int i = 0; i < N; ++i) {
    const T* r = x.value().row(i);
    T* o = out.row(i);
    T mx = r[0];
    for (int j = 1; j < M; ++j) mx = std::max(mx, r[j]);
    T s = T(0);
    for (int j = 0; j < M; ++j) {
      o[j] = std::exp(r[j] - mx);
      s += o[j];
    }
    const T inv = T(1) / s;
    for (int j = 0; j < M; ++j) o[j] *= inv;
  }
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, N, M](Node<T>* n) {
    return [xn, N, M, n]() {
      T* dx = xn->ensure_grad().data();
      for (int i = 0; i < N; ++i) {
        const T* y = n->value.row(i);
        const T* dy = n->grad.row(i);
        T dotv = T(0);
        for (int j = 0; j < M; ++j) dotv += y[j] * dy[j];
        T* d = dx + static_cast<std::size_t>(i) * M;
        for (int j = 0; j < M; ++j) d[j] += y[j] * (dy[j] - dotv);
      }
    };
  });
}

// Rows normalized to unit L2 norm; works on any rank, last axis is the vector.
template <typename T>
Var<T> l2norm_rows(const Var<T>& x) {
  const int C = x.value().dim(x.value().rank() - 1);
  const std::size_t rows = x.value().size() / static_cast<std::size_t>(C);
  Tensor<T> out(x.shape());
  auto norms = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* s = x.value().data() + r * C;
    T* d = out.data() + r * C;
    T nsq = T(0);
    for (int j = 0; j < C; ++j) nsq += s[j] * s[j];
    T nn = std::sqrt(nsq);
    if (nn < T(1e-12)) nn = T(1e-12);
    (*norms)[r] = nn;
    const T inv = T(1) / nn;
    for (int j = 0; j < C; ++j) d[j] = s[j] * inv;
  }
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, norms, rows, C](Node<T>* n) {
    return [xn, norms, rows, C, n]() {
      T* dx = xn->ensure_grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = n->value.data() + r * C;
        const T* dy = n->grad.data() + r * C;
        T dotv = T(0);
        for (int j = 0; j < C; ++j) dotv += y[j] * dy[j];
        const T inv = T(1) / (*norms)[r];
        T* d = dx + r * C;
        for (int j = 0; j < C; ++j) d[j] += (dy[j] - y[j] * dotv) * inv;
      }
    };
  });
}

// Row sums of a rank-2 matrix -> [N].
template <typename T>
Var<T> row_sum(const Var<T>& x) {
  const int N = x.value().dim(0), M = x.value().dim(1);
  Tensor<T> out({N});
  for (int i = 0; i < N; ++i) {
    T s = T(0);
    const T* r = x.value().row(i);
    for (int j = 0; j < M; ++j) s += r[j];
    out[static_cast<std::size_t>(i)] = s;
  }
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, N, M](Node<T>* n) {
    return [xn, N, M, n]() {
      T* dx = xn->ensure_grad().data();
      for (int i = 0; i < N; ++i) {
        const T g = n->grad[static_cast<std::size_t>(i)];
        T* d = dx + static_cast<std::size_t>(i) * M;
        for (int j = 0; j < M; ++j) d[j] += g;
      }
    };
  });
}

// y[i][j] = x[i][j] - v[i]  (per-row scalar subtraction, v is a Var [N])
template <typename T>
Var<T> sub_rowvec(const Var<T>& x, const Var<T>& v) {
  const int N = x.value().dim(0), M = x.value().dim(1);
  TSCD_CHECK(v.value().size() == static_cast<std::size_t>(N), ShapeMismatchError,
             "sub_rowvec: size mismatch");
  Tensor<T> out({N, M});
  for (int i = 0; i < N; ++i) {
    const T* r = x.value().row(i);
    T* o = out.row(i);
    const T b = v.value()[static_cast<std::size_t>(i)];
    for (int j = 0; j < M; ++j) o[j] = r[j] - b;
  }
  auto xn = x.node(), vn = v.node();
  return make_op<T>(std::move(out), {x, v}, [xn, vn, N, M](Node<T>* n) {
    return [xn, vn, N, M, n]() {
      if (xn->requires_grad)
        Kern<T>::axpy(T(1), n->grad.data(), xn->ensure_grad().data(), n->grad.size());
      if (vn->requires_grad) {
        T* dv = vn->ensure_grad().data();
        for (int i = 0; i < N; ++i) {
          const T* g = n->grad.row(i);
          T s = T(0);
          for (int j = 0; j < M; ++j) s += g[j];
          dv[static_cast<std::size_t>(i)] -= s;
        }
      }
    };
  });
}

// Diagonal of a square matrix -> [N].
template <typename T>
Var<T> diag(const Var<T>& x) {
  const int N = x.value().dim(0);
  TSCD_CHECK(x.value().dim(1) == N, ShapeMismatchError, "diag: square matrix required");
  Tensor<T> out({N});
  for (int i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] = x.value().at(i, i);
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn, N](Node<T>* n) {
    return [xn, N, n]() {
      T* dx = xn->ensure_grad().data();
      for (int i = 0; i < N; ++i)
        dx[static_cast<std::size_t>(i) * N + i] += n->grad[static_cast<std::size_t>(i)];
    };
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  Tensor<T> out({1});
  out[0] = static_cast<T>(Kern<T>::reduce_sum(x.value().data(), x.value().size()));
  auto xn = x.node();
  return make_op<T>(std::move(out), {x}, [xn](Node<T>* n) {
    return [xn, n]() {
      const T g = n->grad[0];
      T* dx = xn->ensure_grad().data();
      const std::size_t m = xn->value.size();
      for (std::size_t i = 0; i < m; ++i) dx[i] += g;
    };
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.value().size()));
}

// ---------------------------------------------------------------------------
// Batch normalization (fused, per-channel statistics over all pixels)
// ---------------------------------------------------------------------------

// Training-mode BN with batch statistics; updates running stats as a side
// effect when update_running is set. Eval mode normalizes by the provided
// running statistics (a plain affine map).
template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 Tensor<T>& running_mean, Tensor<T>& running_var, T momentum, T eps,
                 bool training, bool update_running) {
  const int C = x.value().dim(x.value().rank() - 1);
  const std::size_t hw = x.value().size() / static_cast<std::size_t>(C);
  TSCD_CHECK(gamma.value().size() == static_cast<std::size_t>(C) &&
                 beta.value().size() == static_cast<std::size_t>(C),
             ShapeMismatchError, "batchnorm: parameter size mismatch");

  Tensor<T> mean({C}), invstd({C});
  if (training) {
    Kern<T>::ch_sum(x.value().data(), hw, C, mean.data(), false);
    const T scale_n = T(1) / static_cast<T>(hw);
    for (int c = 0; c < C; ++c) mean[c] *= scale_n;
    Tensor<T> var({C});
    for (std::size_t p = 0; p < hw; ++p) {
      const T* r = x.value().data() + p * C;
      for (int c = 0; c < C; ++c) {
        const T d = r[c] - mean[c];
        var[c] += d * d;
      }
    }
    for (int c = 0; c < C; ++c) var[c] *= scale_n;
    if (update_running) {
      for (int c = 0; c < C; ++c) {
        running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean[c];
        running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var[c];
      }
    }
    for (int c = 0; c < C; ++c) invstd[c] = T(1) / std::sqrt(var[c] + eps);
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = T(1) / std::sqrt(running_var[c] + eps);
    }
  }

  // xhat = (x - mean) * invstd; y = gamma * xhat + beta
  Tensor<T> negmean({C});
  for (int c = 0; c < C; ++c) negmean[c] = -mean[c];
  auto xhat = std::make_shared<Tensor<T>>(x.shape());
  Kern<T>::bc_shift_scale(x.value().data(), negmean.data(), invstd.data(), hw, C, xhat->data());
  Tensor<T> out(x.shape());
  {
    Tensor<T> zero({C});
    Tensor<T> gm({C});
    for (int c = 0; c < C; ++c) gm[c] = gamma.value()[c];
    Kern<T>::bc_shift_scale(xhat->data(), zero.data(), gm.data(), hw, C, out.data());
    for (std::size_t p = 0; p < hw; ++p) {
      T* o = out.data() + p * C;
      const T* b = beta.value().data();
      for (int c = 0; c < C; ++c) o[c] += b[c];
    }
  }

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  auto istd = std::make_shared<Tensor<T>>(std::move(invstd));
  return make_op<T>(std::move(out), {x, gamma, beta},
                    [xn, gn, bn, xhat, istd, hw, C, training](Node<T>* n) {
                      return [xn, gn, bn, xhat, istd, hw, C, training, n]() {
                        const Tensor<T>& dy = n->grad;
                        if (bn->requires_grad)
                          Kern<T>::ch_sum(dy.data(), hw, C, bn->ensure_grad().data(), true);
                        if (gn->requires_grad)
                          Kern<T>::ch_dot_acc(dy.data(), xhat->data(), hw, C,
                                              gn->ensure_grad().data());
                        if (!xn->requires_grad) return;
                        if (!training) {
                          // dx += dy * gamma * invstd
                          Tensor<T> gi({C});
                          for (int c = 0; c < C; ++c) gi[c] = gn->value[c] * (*istd)[c];
                          Kern<T>::bc_mul_acc(dy.data(), gi.data(), hw, C,
                                              xn->ensure_grad().data());
                          return;
                        }
                        // Training mode: backprop through the batch statistics.
                        Tensor<T> sum_dy({C}), sum_dy_xhat({C});
                        Kern<T>::ch_sum(dy.data(), hw, C, sum_dy.data(), false);
                        Kern<T>::ch_dot_acc(dy.data(), xhat->data(), hw, C, sum_dy_xhat.data());
                        const T inv_n = T(1) / static_cast<T>(hw);
                        Tensor<T> k1({C}), k2({C}), k3({C});
                        for (int c = 0; c < C; ++c) {
                          const T gi = gn->value[c] * (*istd)[c];
                          k1[c] = gi;
                          k2[c] = gi * inv_n * sum_dy[c];
                          k3[c] = gi * inv_n * sum_dy_xhat[c];
                        }
                        T* dx = xn->ensure_grad().data();
                        for (std::size_t p = 0; p < hw; ++p) {
                          const T* g = dy.data() + p * C;
                          const T* xh = xhat->data() + p * C;
                          T* d = dx + p * C;
                          for (int c = 0; c < C; ++c)
                            d[c] += k1[c] * g[c] - k2[c] - k3[c] * xh[c];
                        }
                      };
                    });
}

}  // namespace tscd::ag
