#include "sman/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "sman/primitives.hpp"

namespace sman {

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, false, {}});
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::parameter(typename ParamStore<T>::Entry& entry) {
  Node node;
  node.external = &entry.value;
  node.requires_grad = true;
  Tensor<T>* sink = &entry.grad;
  node.backward = [sink](Tape& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    auto dst = sink->data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  };
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
  Node node{std::move(value), nullptr, {}, needs, {}};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const auto& node = nodes_[id];
  return node.external ? *node.external : node.value;
}

template <typename T>
Tensor<T>& Tape<T>::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor<T>(value(id).shape());
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.value().size() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, i);
  }
}

namespace ad {

namespace {

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool ta, bool tb) {
  auto* tape = a.tape;
  return tape->record(sman::matmul(a.value(), b.value(), ta, tb), {a, b},
                      [a, b, ta, tb](Tape<T>& t, std::size_t self) {
                        const auto& g = t.grad(self);
                        if (t.requires_grad(a.id)) {
                          if (!ta)
                            matmul_accumulate(g, b.value(), t.grad(a.id), false, !tb);
                          else
                            matmul_accumulate(b.value(), g, t.grad(a.id), tb, true);
                        }
                        if (t.requires_grad(b.id)) {
                          if (!tb)
                            matmul_accumulate(a.value(), g, t.grad(b.id), !ta, false);
                          else
                            matmul_accumulate(g, a.value(), t.grad(b.id), true, ta);
                        }
                      });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) accumulate(t.grad(a.id), g);
    if (t.requires_grad(b.id)) accumulate(t.grad(b.id), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) accumulate(t.grad(a.id), g);
    if (t.requires_grad(b.id)) {
      auto d = t.grad(b.id).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) {
      auto d = t.grad(a.id).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * b.value()[i];
    }
    if (t.requires_grad(b.id)) {
      auto d = t.grad(b.id).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * a.value()[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto d = t.grad(a.id).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * factor;
  });
}

template <typename T>
Var<T> mul_const(Var<T> a, const Tensor<T>& weights) {
  require_same_shape(a.value(), weights, "mul_const");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= weights[i];
  return a.tape->record(std::move(out), {a}, [a, w = weights](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto d = t.grad(a.id).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * w[i];
  });
}

template <typename T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  const auto& x = a.value();
  const auto& b = bias.value();
  if (b.size() != x.cols()) {
    throw ShapeError("add_bias: bias of " + std::to_string(b.size()) + " entries for " +
                     std::to_string(x.cols()) + " columns");
  }
  Tensor<T> out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return a.tape->record(std::move(out), {a, bias}, [a, bias](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) accumulate(t.grad(a.id), g);
    if (t.requires_grad(bias.id)) {
      auto d = t.grad(bias.id).data();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) d[c] += row[c];
      }
    }
  });
}

template <typename T>
Var<T> elu(Var<T> a) {
  return a.tape->record(sman::elu(a.value()), {a}, [a](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = a.value();
    const auto& y = t.value(self);
    auto d = t.grad(a.id).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (x[i] > T(0) ? T(1) : y[i] + T(1));
  });
}

namespace {

template <typename T>
void softmax_backward(const Tensor<T>& y, const Tensor<T>& g, Tensor<T>& dx) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const auto yr = y.row(r);
    const auto gr = g.row(r);
    auto dr = dx.row(r);
    T dot = 0;
    for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
    for (std::size_t c = 0; c < yr.size(); ++c) dr[c] += yr[c] * (gr[c] - dot);
  }
}

}  // namespace

template <typename T>
Var<T> softmax_rows(Var<T> a) {
  return a.tape->record(sman::softmax_rows(a.value()), {a}, [a](Tape<T>& t, std::size_t self) {
    softmax_backward(t.value(self), t.grad(self), t.grad(a.id));
  });
}

template <typename T>
Var<T> masked_softmax_rows(Var<T> a, const Tensor<T>& mask) {
  return a.tape->record(sman::masked_softmax_rows(a.value(), mask), {a},
                        [a](Tape<T>& t, std::size_t self) {
                          softmax_backward(t.value(self), t.grad(self), t.grad(a.id));
                        });
}

template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const std::size_t> indices, bool pad_zero) {
  const auto& src = table.value();
  require_matrix(src, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: no indices");
  Tensor<T> out({indices.size(), src.cols()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    if (idx >= src.rows()) {
      throw IndexError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                       std::to_string(src.rows()) + " rows");
    }
    if (pad_zero && idx == 0) continue;
    std::copy(src.row(idx).begin(), src.row(idx).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape->record(std::move(out), {table},
                            [table, idx = std::move(idx), pad_zero](Tape<T>& t, std::size_t self) {
                              const auto& g = t.grad(self);
                              auto& d = t.grad(table.id);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                if (pad_zero && idx[i] == 0) continue;
                                auto dst = d.row(idx[i]);
                                auto src_row = g.row(i);
                                for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src_row[c];
                              }
                            });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor<T> out({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + offset);
    offset += v.cols();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(out), parts,
                      [inputs = std::move(inputs)](Tape<T>& t, std::size_t self) {
                        const auto& g = t.grad(self);
                        std::size_t offset = 0;
                        for (const auto& p : inputs) {
                          const auto width = p.cols();
                          if (t.requires_grad(p.id)) {
                            auto& d = t.grad(p.id);
                            for (std::size_t r = 0; r < g.rows(); ++r) {
                              auto src = g.row(r).subspan(offset, width);
                              auto dst = d.row(r);
                              for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                            }
                          }
                          offset += width;
                        }
                      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Tensor<T> out({rows, cols});
  auto it = out.data().begin();
  for (const auto& p : parts) it = std::copy(p.value().data().begin(), p.value().data().end(), it);
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(out), parts,
                      [inputs = std::move(inputs)](Tape<T>& t, std::size_t self) {
                        const auto& g = t.grad(self);
                        std::size_t offset = 0;
                        for (const auto& p : inputs) {
                          const auto n = p.value().size();
                          if (t.requires_grad(p.id)) {
                            auto d = t.grad(p.id).data();
                            for (std::size_t i = 0; i < n; ++i) d[i] += g[offset + i];
                          }
                          offset += n;
                        }
                      });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
  const auto& src = a.value();
  require_matrix(src, "slice_rows");
  if (begin >= end || end > src.rows()) throw ShapeError("slice_rows: invalid row range");
  const auto cols = src.cols();
  std::vector<T> data(src.data().begin() + begin * cols, src.data().begin() + end * cols);
  return a.tape->record(Tensor<T>({end - begin, cols}, std::move(data)), {a},
                        [a, begin, cols](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto d = t.grad(a.id).data().subspan(begin * cols, g.size());
                          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                        });
}

template <typename T>
Var<T> unfold_windows(Var<T> x, std::size_t width) {
  const auto& src = x.value();
  require_matrix(src, "unfold_windows");
  if (width == 0 || width > src.rows()) throw ShapeError("unfold_windows: window exceeds sequence");
  const auto cols = src.cols();
  const auto count = src.rows() - width + 1;
  Tensor<T> out({count, width * cols});
  for (std::size_t i = 0; i < count; ++i) {
    auto from = src.data().subspan(i * cols, width * cols);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return x.tape->record(std::move(out), {x},
                        [x, width, cols, count](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto d = t.grad(x.id).data();
                          for (std::size_t i = 0; i < count; ++i) {
                            auto src_row = g.row(i);
                            for (std::size_t k = 0; k < width * cols; ++k)
                              d[i * cols + k] += src_row[k];
                          }
                        });
}

template <typename T>
Var<T> max_rows(Var<T> x, std::size_t count) {
  const auto& src = x.value();
  require_matrix(src, "max_rows");
  if (count == 0 || count > src.rows()) throw ShapeError("max_rows: invalid row count");
  const auto cols = src.cols();
  Tensor<T> out({1, cols});
  std::vector<std::size_t> arg(cols, 0);
  for (std::size_t c = 0; c < cols; ++c) {
    out[c] = src(0, c);
    for (std::size_t r = 1; r < count; ++r) {
      if (src(r, c) > out[c]) {
        out[c] = src(r, c);
        arg[c] = r;
      }
    }
  }
  return x.tape->record(std::move(out), {x},
                        [x, arg = std::move(arg)](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto& d = t.grad(x.id);
                          for (std::size_t c = 0; c < arg.size(); ++c) d(arg[c], c) += g[c];
                        });
}

template <typename T>
Var<T> nll(Var<T> probs, std::span<const std::size_t> labels) {
  const auto& p = probs.value();
  require_matrix(p, "nll");
  if (labels.size() != p.rows()) throw ShapeError("nll: one label per row required");
  T total = 0;
  for (std::size_t r = 0; r < p.rows(); ++r) total += cross_entropy(p.row(r), labels[r]);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return probs.tape->record(Tensor<T>::scalar(total), {probs},
                            [probs, lab = std::move(lab)](Tape<T>& t, std::size_t self) {
                              const T g = t.grad(self)[0];
                              const auto& pv = probs.value();
                              auto& d = t.grad(probs.id);
                              for (std::size_t r = 0; r < lab.size(); ++r) {
                                const T q = pv(r, lab[r]);
                                if (q > static_cast<T>(kProbabilityFloor)) d(r, lab[r]) -= g / q;
                              }
                            });
}

template <typename T>
Var<T> sum_squares(Var<T> a) {
  T total = 0;
  for (auto v : a.value().data()) total += v * v;
  return a.tape->record(Tensor<T>::scalar(total), {a}, [a](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    auto d = t.grad(a.id).data();
    const auto& x = a.value();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += T(2) * g * x[i];
  });
}

template <typename T>
Var<T> sum(std::span<const Var<T>> scalars) {
  if (scalars.empty()) throw ShapeError("sum: no inputs");
  T total = 0;
  for (const auto& s : scalars) {
    if (s.value().size() != 1) throw ShapeError("sum: inputs must be scalars");
    total += s.value()[0];
  }
  std::vector<Var<T>> inputs(scalars.begin(), scalars.end());
  return scalars[0].tape->record(Tensor<T>::scalar(total), scalars,
                      [inputs = std::move(inputs)](Tape<T>& t, std::size_t self) {
                        const T g = t.grad(self)[0];
                        for (const auto& s : inputs)
                          if (t.requires_grad(s.id)) t.grad(s.id)[0] += g;
                      });
}

#define SMAN_INSTANTIATE_AD(T)                                                                 \
  template Var<T> matmul(Var<T>, Var<T>, bool, bool);                                          \
  template Var<T> add(Var<T>, Var<T>);                                                         \
  template Var<T> sub(Var<T>, Var<T>);                                                         \
  template Var<T> mul(Var<T>, Var<T>);                                                         \
  template Var<T> scale(Var<T>, T);                                                            \
  template Var<T> mul_const(Var<T>, const Tensor<T>&);                                         \
  template Var<T> add_bias(Var<T>, Var<T>);                                                    \
  template Var<T> elu(Var<T>);                                                                 \
  template Var<T> softmax_rows(Var<T>);                                                        \
  template Var<T> masked_softmax_rows(Var<T>, const Tensor<T>&);                               \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>, bool);                     \
  template Var<T> concat_cols(std::span<const Var<T>>);                                        \
  template Var<T> concat_rows(std::span<const Var<T>>);                                        \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                                \
  template Var<T> unfold_windows(Var<T>, std::size_t);                                         \
  template Var<T> max_rows(Var<T>, std::size_t);                                               \
  template Var<T> nll(Var<T>, std::span<const std::size_t>);                                   \
  template Var<T> sum_squares(Var<T>);                                                         \
  template Var<T> sum(std::span<const Var<T>>);

SMAN_INSTANTIATE_AD(float)
SMAN_INSTANTIATE_AD(double)

#undef SMAN_INSTANTIATE_AD

}  // namespace ad

template class Tape<float>;
template class Tape<double>;

}  // namespace sman
