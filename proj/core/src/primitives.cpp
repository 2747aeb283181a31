#include "sman/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sman {

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& m) {
  require_matrix(m, "softmax_rows");
  Tensor<T> out(m.shape());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    auto dst = out.row(r);
    const T peak = *std::max_element(in.begin(), in.end());
    T total = 0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      total += dst[c];
    }
    for (auto& v : dst) v /= total;
  }
  return out;
}

template <typename T>
Tensor<T> masked_softmax_rows(const Tensor<T>& m, const Tensor<T>& mask) {
  require_matrix(m, "masked_softmax_rows");
  require_same_shape(m, mask, "masked_softmax_rows");
  Tensor<T> out(m.shape());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    const auto keep = mask.row(r);
    auto dst = out.row(r);
    T peak = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < in.size(); ++c)
      if (keep[c] != T(0)) peak = std::max(peak, in[c]);
    if (peak == -std::numeric_limits<T>::infinity()) continue;
    T total = 0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = keep[c] != T(0) ? std::exp(in[c] - peak) : T(0);
      total += dst[c];
    }
    for (auto& v : dst) v /= total;
  }
  return out;
}

template <typename T>
Tensor<T> elu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(),
                 [](T v) { return elu(v); });
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[label], static_cast<T>(kProbabilityFloor)));
}

template Tensor<float> softmax_rows(const Tensor<float>&);
template Tensor<double> softmax_rows(const Tensor<double>&);
template Tensor<float> masked_softmax_rows(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> masked_softmax_rows(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> elu(const Tensor<float>&);
template Tensor<double> elu(const Tensor<double>&);
template float cross_entropy(std::span<const float>, std::size_t);
template double cross_entropy(std::span<const double>, std::size_t);

}  // namespace sman
