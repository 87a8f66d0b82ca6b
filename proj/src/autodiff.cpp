#include "rgcseg/autodiff.hpp"

#include <stdexcept>

namespace rgcseg::ad {

template <typename T>
Var Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.op = requires_grad ? "leaf" : "constant";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::push(std::string op, Tensor<T> value, std::vector<Var> parents, Backward backward) {
  if (!value.all_finite()) throw NonFiniteError(op, "forward");
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (Var p : parents) {
    if (p.id >= nodes_.size()) throw std::out_of_range("tape: parent refers to a later node");
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const Tensor<T>& g) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw ShapeError("gradient " + shape_str(g.shape()) + " does not match value " +
                     shape_str(n.value.shape()) + " of op '" + n.op + "'");
  }
  if (!g.all_finite()) throw NonFiniteError(nodes_.at(current_).op, "backward");
  if (n.grad.shape() != n.value.shape()) {
    n.grad = g;
  } else {
    ops::accumulate(n.grad, g);
  }
}

template <typename T>
void Tape<T>::accumulate(Var v, Tensor<T>&& g) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  if (n.grad.shape() != n.value.shape() && g.shape() == n.value.shape()) {
    if (!g.all_finite()) throw NonFiniteError(nodes_.at(current_).op, "backward");
    n.grad = std::move(g);
    return;
  }
  accumulate(v, static_cast<const Tensor<T>&>(g));
}

template <typename T>
void Tape<T>::backward(Var root) {
  for (auto& n : nodes_) n.grad = Tensor<T>();
  Node& r = nodes_.at(root.id);
  if (!r.requires_grad) return;
  r.grad = Tensor<T>(r.value.shape(), T{1});
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || !n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    current_ = id;
    n.backward(*this, id);
    // Interior gradients are dead once propagated; only leaves keep theirs.
    if (!n.parents.empty()) n.grad = Tensor<T>();
  }
}

namespace {

template <typename T>
bool needs(Tape<T>& t, Var v) {
  return t.requires_grad(v);
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, ops::ConvGeometry geom) {
  auto out = ops::conv2d(t.value(x), t.value(w), t.value(b), geom);
  return t.push("conv2d", std::move(out), {x, w, b}, [x, w, b, geom](Tape<T>& tp, std::size_t self) {
    auto g = ops::conv2d_backward(tp.value(x), tp.value(w), tp.grad(Var{self}), geom, needs(tp, x));
    if (needs(tp, x)) tp.accumulate(x, g.input);
    tp.accumulate(w, g.weight);
    tp.accumulate(b, g.bias);
  });
}

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  auto out = ops::matmul(t.value(a), t.value(b));
  return t.push("matmul", std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(Var{self});
    if (needs(tp, a)) tp.accumulate(a, ops::matmul_nt(g, tp.value(b)));
    if (needs(tp, b)) tp.accumulate(b, ops::matmul_tn(tp.value(a), g));
  });
}

template <typename T>
Var bilinear_upsample(Tape<T>& t, Var x, int scale) {
  auto out = ops::bilinear_upsample(t.value(x), scale);
  return t.push("bilinear_upsample", std::move(out), {x}, [x, scale](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, ops::bilinear_upsample_backward(tp.grad(Var{self}), tp.value(x).shape(), scale));
  });
}

template <typename T>
Var concat_channels(Tape<T>& t, Var a, Var b) {
  auto out = ops::concat_channels(t.value(a), t.value(b));
  const std::size_t ca = t.value(a).dim(1), cb = t.value(b).dim(1);
  return t.push("concat_channels", std::move(out), {a, b}, [a, b, ca, cb](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(Var{self});
    if (needs(tp, a)) tp.accumulate(a, ops::slice_channels(g, 0, ca));
    if (needs(tp, b)) tp.accumulate(b, ops::slice_channels(g, ca, cb));
  });
}

template <typename T>
Var select_batch(Tape<T>& t, Var x, std::size_t n) {
  auto out = ops::select_batch(t.value(x), n);
  return t.push("select_batch", std::move(out), {x}, [x, n](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(Var{self});
    Tensor<T> full(tp.value(x).shape());
    std::copy(g.data().begin(), g.data().end(), full.data().begin() + static_cast<long>(n * g.numel()));
    tp.accumulate(x, full);
  });
}

template <typename T>
Var stack_batch(Tape<T>& t, const std::vector<Var>& parts) {
  std::vector<Tensor<T>> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(t.value(p));
  auto out = ops::stack_batch(values);
  return t.push("stack_batch", std::move(out), parts, [parts](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(Var{self});
    std::size_t offset = 0;
    for (Var p : parts) {
      const auto& v = tp.value(p);
      std::vector<T> chunk(g.data().begin() + static_cast<long>(offset),
                           g.data().begin() + static_cast<long>(offset + v.numel()));
      offset += v.numel();
      tp.accumulate(p, Tensor<T>(v.shape(), std::move(chunk)));
    }
  });
}

template <typename T>
Var reshape(Tape<T>& t, Var x, const Shape& shape) {
  auto out = ops::reshape(t.value(x), shape);
  return t.push("reshape", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, tp.grad(Var{self}).reshaped(tp.value(x).shape()));
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  auto out = ops::add(t.value(a), t.value(b));
  return t.push("add", std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(Var{self});
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

template <typename T>
Var scale_by(Tape<T>& t, Var x, T alpha) {
  auto out = ops::scale_by(t.value(x), alpha);
  return t.push("scale_by", std::move(out), {x}, [x, alpha](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, ops::scale_by(tp.grad(Var{self}), alpha));
  });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
  auto out = ops::relu(t.value(x));
  return t.push("relu", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, ops::relu_backward(tp.value(x), tp.grad(Var{self})));
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var x) {
  auto out = ops::sigmoid(t.value(x));
  return t.push("sigmoid", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    const auto& y = tp.value(Var{self});
    Tensor<T> g = tp.grad(Var{self});
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= y[i] * (T{1} - y[i]);
    tp.accumulate(x, g);
  });
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
  Tensor<T> out({1}, ops::sum(t.value(x)));
  return t.push("sum", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, Tensor<T>(tp.value(x).shape(), tp.grad(Var{self})[0]));
  });
}

template <typename T>
Var bce_loss(Tape<T>& t, Var logits, Var masks) {
  const auto& m = t.value(masks);
  for (T v : m.data()) {
    if (v != T{0} && v != T{1}) throw std::invalid_argument("bce_loss: masks must be binary");
  }
  Tensor<T> out({1}, ops::bce_with_logits(t.value(logits), m));
  return t.push("bce_loss", std::move(out), {logits, masks}, [logits, masks](Tape<T>& tp, std::size_t self) {
    tp.accumulate(logits, ops::bce_with_logits_backward(tp.value(logits), tp.value(masks),
                                                        tp.grad(Var{self})[0]));
  });
}

template <typename T>
Var sabotage(Tape<T>& t, Var x, T factor) {
  return t.push("sabotage", t.value(x), {x}, [x, factor](Tape<T>& tp, std::size_t self) {
    tp.accumulate(x, ops::scale_by(tp.grad(Var{self}), factor));
  });
}

#define RGCSEG_INSTANTIATE_AD(T)                                                   \
  template class Tape<T>;                                                          \
  template Var conv2d(Tape<T>&, Var, Var, Var, ops::ConvGeometry);                 \
  template Var matmul(Tape<T>&, Var, Var);                                         \
  template Var bilinear_upsample(Tape<T>&, Var, int);                              \
  template Var concat_channels(Tape<T>&, Var, Var);                                \
  template Var select_batch(Tape<T>&, Var, std::size_t);                           \
  template Var stack_batch(Tape<T>&, const std::vector<Var>&);                     \
  template Var reshape(Tape<T>&, Var, const Shape&);                               \
  template Var add(Tape<T>&, Var, Var);                                            \
  template Var scale_by(Tape<T>&, Var, T);                                         \
  template Var relu(Tape<T>&, Var);                                                \
  template Var sigmoid(Tape<T>&, Var);                                             \
  template Var sum(Tape<T>&, Var);                                                 \
  template Var bce_loss(Tape<T>&, Var, Var);                                       \
  template Var sabotage(Tape<T>&, Var, T);

RGCSEG_INSTANTIATE_AD(float)
RGCSEG_INSTANTIATE_AD(double)

}  // namespace rgcseg::ad
