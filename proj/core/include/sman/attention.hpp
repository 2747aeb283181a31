#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sman/autodiff.hpp"
#include "sman/graphs.hpp"

namespace sman {

using Real = double;
using Matrix = Tensor<Real>;
using Node = Var<Real>;
using RealTape = Tape<Real>;
using Params = ParamStore<Real>;

// How the normalized adjacency enters the attention scores.
//   Literal: softmax((Q W K^T / sqrt(d)) * A), the product taken elementwise.
//   Hard:    softmax over positions with A != 0 only; other weights are 0.
enum class MaskMode { Literal, Hard };

std::string_view mask_mode_name(MaskMode mode);
MaskMode parse_mask_mode(std::string_view text);

// Weights of one multi-head block bound to a tape.
struct AttentionWeights {
  std::vector<Node> head_transforms;  // H of d x d
  Node output_projection;             // H*d x d
};

struct AttentionBlock {
  std::string name;
  std::size_t heads = 1;
  std::size_t dim = 1;
  MaskMode mode = MaskMode::Literal;

  std::string head_name(std::size_t h) const;
  std::string projection_name() const;
  void register_params(Params& params, std::mt19937_64& rng, double init_std) const;
  AttentionWeights bind(RealTape& tape, Params& params) const;
  AttentionWeights bind_frozen(RealTape& tape, const Params& params) const;
};

// Optional capture of intermediate values of one head.
struct AttentionProbe {
  Matrix scores;   // pre-softmax, after the structural mask is applied
  Matrix weights;  // post-softmax
};

// One structure-aware head: n_q x d output.
Node structure_attention_head(Node query, Node key, Node value, Node head_transform,
                              const Matrix& norm_adj, MaskMode mode, AttentionProbe* probe = nullptr);

// ELU([Z_1 ... Z_H] W_o) + Q.
Node multi_head_encode(const AttentionWeights& weights, Node query, Node key, Node value,
                       const Matrix& norm_adj, MaskMode mode);

// Tables carry the PAD row 0; masks cover non-PAD rows and columns only. The
// result keeps a zero PAD row.
Node encode_publishers(const AttentionWeights& weights, Node publishers, Node news,
                       const Matrix& publisher_mask, MaskMode mode);

// Encodes every user node against the full user table.
Node encode_users(const AttentionWeights& weights, Node users, const Matrix& user_mask, MaskMode mode);

// Per-news slot representations, ((|N|+1) * K) x d with row n*K + j for slot
// j of news n. Every slot query is the slot user's embedding masked by that
// user's adjacency row, so a slot's encoding equals the encoding of its user;
// PAD slots are zero.
Node encode_diffusion(const AttentionWeights& weights, const RepostMatrix& reposts, Node users,
                      const Matrix& user_mask, MaskMode mode);

}  // namespace sman
