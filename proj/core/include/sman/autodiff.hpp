#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <initializer_list>
#include <vector>

#include "sman/param_store.hpp"
#include "sman/tensor.hpp"

namespace sman {

template <typename T>
class Tape;

// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order and replayed
// backwards by backward(); a tape is single-use.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var<T> constant(Tensor<T> value);
  // Leaf bound to a parameter; backward() accumulates into entry.grad.
  // The entry must outlive the tape.
  Var<T> parameter(typename ParamStore<T>::Entry& entry);

  Var<T> record(Tensor<T> value, std::span<const Var<T>> parents, Backward backward);
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
    return record(std::move(value), std::span<const Var<T>>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, zero-initialized on first access.
  Tensor<T>& grad(std::size_t id);

  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

namespace ad {

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_a = false, bool transpose_b = false);
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
// Elementwise product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
// Elementwise product with a constant tensor of the same shape.
template <typename T>
Var<T> mul_const(Var<T> a, const Tensor<T>& weights);
// a (n x m) plus a bias of m entries broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> a, Var<T> bias);
template <typename T>
Var<T> elu(Var<T> a);
template <typename T>
Var<T> softmax_rows(Var<T> a);
template <typename T>
Var<T> masked_softmax_rows(Var<T> a, const Tensor<T>& mask);
// Rows of a 2-D table. With pad_zero, index 0 yields a zero row and receives
// no gradient.
template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const std::size_t> indices, bool pad_zero);
template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts);
template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
// Sliding windows: row i of the result is rows [i, i + width) of x laid end to end.
template <typename T>
Var<T> unfold_windows(Var<T> x, std::size_t width);
// Column-wise maximum over the first `count` rows, as a 1 x cols row.
template <typename T>
Var<T> max_rows(Var<T> x, std::size_t count);
// Sum over rows of -log(max(probs[r][labels[r]], floor)).
template <typename T>
Var<T> nll(Var<T> probs, std::span<const std::size_t> labels);
template <typename T>
Var<T> sum_squares(Var<T> a);
// Sum of scalar nodes.
template <typename T>
Var<T> sum(std::span<const Var<T>> scalars);

}  // namespace ad
}  // namespace sman
