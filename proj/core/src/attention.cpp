#include "sman/attention.hpp"

#include <cmath>

#include "sman/errors.hpp"
#include "sman/primitives.hpp"

namespace sman {

std::string_view mask_mode_name(MaskMode mode) { return mode == MaskMode::Literal ? "literal" : "hard"; }

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "literal") return MaskMode::Literal;
  if (text == "hard") return MaskMode::Hard;
  throw ConfigError("unknown mask mode '" + std::string(text) + "'");
}

std::string AttentionBlock::head_name(std::size_t h) const { return name + ".head." + std::to_string(h); }

std::string AttentionBlock::projection_name() const { return name + ".out"; }

void AttentionBlock::register_params(Params& params, std::mt19937_64& rng, double init_std) const {
  if (heads == 0) throw ConfigError("attention block needs at least one head");
  std::normal_distribution<double> normal(0.0, init_std);
  auto draw = [&](Shape shape) {
    Matrix m(std::move(shape));
    for (auto& v : m.data()) v = normal(rng);
    return m;
  };
  for (std::size_t h = 0; h < heads; ++h) params.add(head_name(h), draw({dim, dim}));
  params.add(projection_name(), draw({heads * dim, dim}));
}

AttentionWeights AttentionBlock::bind(RealTape& tape, Params& params) const {
  AttentionWeights w;
  for (std::size_t h = 0; h < heads; ++h) w.head_transforms.push_back(tape.parameter(params.at(head_name(h))));
  w.output_projection = tape.parameter(params.at(projection_name()));
  return w;
}

AttentionWeights AttentionBlock::bind_frozen(RealTape& tape, const Params& params) const {
  AttentionWeights w;
  for (std::size_t h = 0; h < heads; ++h) w.head_transforms.push_back(tape.constant(params.at(head_name(h)).value));
  w.output_projection = tape.constant(params.at(projection_name()).value);
  return w;
}

Node structure_attention_head(Node query, Node key, Node value, Node head_transform,
                              const Matrix& norm_adj, MaskMode mode, AttentionProbe* probe) {
  const auto d = query.cols();
  if (key.cols() != d || value.rows() != key.rows() || head_transform.rows() != d ||
      head_transform.cols() != d) {
    throw ShapeError("structure_attention_head: inconsistent Q/K/V/W shapes");
  }
  if (norm_adj.rank() != 2 || norm_adj.rows() != query.rows() || norm_adj.cols() != key.rows()) {
    throw ShapeError("structure_attention_head: mask must be n_q x n_k, got " + shape_string(norm_adj.shape()));
  }
  auto projected = ad::matmul(query, head_transform);
  auto scores = ad::scale(ad::matmul(projected, key, false, true), 1.0 / std::sqrt(static_cast<Real>(d)));
  Node weights;
  if (mode == MaskMode::Literal) {
    scores = ad::mul_const(scores, norm_adj);
    weights = ad::softmax_rows(scores);
  } else {
    weights = ad::masked_softmax_rows(scores, norm_adj);
  }
  if (probe) {
    probe->scores = scores.value();
    probe->weights = weights.value();
  }
  return ad::matmul(weights, value);
}

Node multi_head_encode(const AttentionWeights& weights, Node query, Node key, Node value,
                       const Matrix& norm_adj, MaskMode mode) {
  const auto d = query.cols();
  const auto heads = weights.head_transforms.size();
  if (heads == 0) throw ShapeError("multi_head_encode: no heads");
  if (weights.output_projection.rows() != heads * d || weights.output_projection.cols() != d) {
    throw ShapeError("multi_head_encode: output projection must be H*d x d");
  }
  std::vector<Node> outputs;
  outputs.reserve(heads);
  for (const auto& w : weights.head_transforms) {
    outputs.push_back(structure_attention_head(query, key, value, w, norm_adj, mode));
  }
  auto joined = heads == 1 ? outputs.front() : ad::concat_cols<Real>(outputs);
  return ad::add(ad::elu(ad::matmul(joined, weights.output_projection)), query);
}

namespace {

Node with_pad_row(Node body) {
  auto* tape = body.tape;
  std::vector<Node> parts{tape->constant(Matrix({1, body.cols()})), body};
  return ad::concat_rows<Real>(parts);
}

Node without_pad_row(Node table) {
  if (table.rows() < 2) throw ShapeError("embedding table has no rows beyond PAD");
  return ad::slice_rows(table, 1, table.rows());
}

}  // namespace

Node encode_publishers(const AttentionWeights& weights, Node publishers, Node news,
                       const Matrix& publisher_mask, MaskMode mode) {
  auto q = without_pad_row(publishers);
  auto kv = without_pad_row(news);
  return with_pad_row(multi_head_encode(weights, q, kv, kv, publisher_mask, mode));
}

Node encode_users(const AttentionWeights& weights, Node users, const Matrix& user_mask, MaskMode mode) {
  auto u = without_pad_row(users);
  return with_pad_row(multi_head_encode(weights, u, u, u, user_mask, mode));
}

Node encode_diffusion(const AttentionWeights& weights, const RepostMatrix& reposts, Node users,
                      const Matrix& user_mask, MaskMode mode) {
  const auto encoded = encode_users(weights, users, user_mask, mode);
  std::vector<std::size_t> slots;
  slots.reserve(reposts.rows() * reposts.slots());
  for (std::size_t n = 0; n < reposts.rows(); ++n) {
    for (auto u : reposts.row(n)) {
      if (u >= encoded.rows()) throw IndexError("encode_diffusion: user node " + std::to_string(u) + " out of range");
      slots.push_back(u);
    }
  }
  return ad::gather_rows(encoded, std::span<const std::size_t>(slots), true);
}

}  // namespace sman
