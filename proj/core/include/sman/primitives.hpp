#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "sman/tensor.hpp"

namespace sman {

// Lower bound applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

// Row-wise softmax of a 2-D tensor (max-shifted for stability).
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& m);

// Row-wise softmax restricted to positions where mask != 0. Masked positions get
// exactly 0; a row with no unmasked position is all zeros.
template <typename T>
Tensor<T> masked_softmax_rows(const Tensor<T>& m, const Tensor<T>& mask);

template <typename T>
T elu(T x) {
  return x > T(0) ? x : std::expm1(x);
}

template <typename T>
Tensor<T> elu(const Tensor<T>& x);

// -log(max(probs[label], floor)).
template <typename T>
T cross_entropy(std::span<const T> probs, std::size_t label);

}  // namespace sman
