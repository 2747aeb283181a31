#include "sman/tensor.hpp"

#include <Eigen/Core>

namespace sman {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMajor<T>> view(const Tensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<RowMajor<T>> view(Tensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
std::pair<std::size_t, std::size_t> product_shape(const Tensor<T>& a, const Tensor<T>& b,
                                                  bool ta, bool tb) {
  const auto a_rows = ta ? a.cols() : a.rows();
  const auto a_inner = ta ? a.rows() : a.cols();
  const auto b_inner = tb ? b.cols() : b.rows();
  const auto b_cols = tb ? b.rows() : b.cols();
  if (a_inner != b_inner) {
    throw ShapeError("matmul: inner dimensions differ (" + shape_string(a.shape()) +
                     (ta ? "^T" : "") + " x " + shape_string(b.shape()) + (tb ? "^T" : "") + ")");
  }
  return {a_rows, b_cols};
}

}  // namespace

template <typename T>
void matmul_accumulate(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c, bool ta, bool tb) {
  const auto [r, k] = product_shape(a, b, ta, tb);
  if (c.rows() != r || c.cols() != k) throw ShapeError("matmul: output shape mismatch");
  auto out = view(c);
  const auto av = view(a);
  const auto bv = view(b);
  if (!ta && !tb) {
    out.noalias() += av * bv;
  } else if (ta && !tb) {
    out.noalias() += av.transpose() * bv;
  } else if (!ta && tb) {
    out.noalias() += av * bv.transpose();
  } else {
    out.noalias() += av.transpose() * bv.transpose();
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool ta, bool tb) {
  const auto [r, k] = product_shape(a, b, ta, tb);
  Tensor<T> c({r, k});
  matmul_accumulate(a, b, c, ta, tb);
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  Tensor<T> out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&, bool, bool);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&, bool, bool);
template void matmul_accumulate(const Tensor<float>&, const Tensor<float>&, Tensor<float>&, bool,
                                bool);
template void matmul_accumulate(const Tensor<double>&, const Tensor<double>&, Tensor<double>&,
                                bool, bool);
template Tensor<float> transpose(const Tensor<float>&);
template Tensor<double> transpose(const Tensor<double>&);

}  // namespace sman
