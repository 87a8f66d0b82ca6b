#pragma once

// Reverse-mode differentiation over a Wengert list. Nodes are appended in
// evaluation order, so node ids are already a topological order; backward
// walks them in reverse and visits each exactly once.

#include <functional>
#include <string>
#include <vector>

#include "rgcseg/ops.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg::ad {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

template <typename T>
class Tape {
 public:
  // Receives the node's own id; reads grad(self) and calls accumulate() on parents.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var leaf(Tensor<T> value, bool requires_grad = true);
  Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Appends an op result. Throws NonFiniteError if the value contains NaN/Inf.
  Var push(std::string op, Tensor<T> value, std::vector<Var> parents, Backward backward);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  // Leaf gradient after backward(); zeros if nothing flowed in. Interior
  // nodes drop their gradient once it has been propagated.
  const Tensor<T>& grad(Var v);
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  const std::string& op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  // Throws NonFiniteError naming the op whose backward rule produced g.
  void accumulate(Var v, const Tensor<T>& g);
  void accumulate(Var v, Tensor<T>&& g);
  const std::vector<Var>& parents(std::size_t id) const { return nodes_.at(id).parents; }

  // Seeds d(root)/d(root) = 1 elementwise and runs every backward rule once.
  void backward(Var root);

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;  // lazily allocated
    std::vector<Var> parents;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::size_t current_ = 0;
};

// Differentiable ops. Each forwards to rgcseg::ops and records the matching VJP.
template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, ops::ConvGeometry geom);
template <typename T>
Var matmul(Tape<T>& t, Var a, Var b);
template <typename T>
Var bilinear_upsample(Tape<T>& t, Var x, int scale);
template <typename T>
Var concat_channels(Tape<T>& t, Var a, Var b);
template <typename T>
Var select_batch(Tape<T>& t, Var x, std::size_t n);
template <typename T>
Var stack_batch(Tape<T>& t, const std::vector<Var>& parts);
template <typename T>
Var reshape(Tape<T>& t, Var x, const Shape& shape);
template <typename T>
Var add(Tape<T>& t, Var a, Var b);
template <typename T>
Var scale_by(Tape<T>& t, Var x, T alpha);
template <typename T>
Var relu(Tape<T>& t, Var x);
template <typename T>
Var sigmoid(Tape<T>& t, Var x);
template <typename T>
Var sum(Tape<T>& t, Var x);  // -> shape {1}
template <typename T>
Var bce_loss(Tape<T>& t, Var logits, Var masks);  // -> shape {1}

// Identity forward with a deliberately wrong backward (gradient scaled by
// `factor`). Used by mutation tests of the gradient checker.
template <typename T>
Var sabotage(Tape<T>& t, Var x, T factor);

}  // namespace rgcseg::ad
