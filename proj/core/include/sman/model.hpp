#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sman/attention.hpp"
#include "sman/config.hpp"
#include "sman/corpus.hpp"
#include "sman/graphs.hpp"
#include "sman/text_cnn.hpp"

namespace sman {

enum class Variant { Full, NoPc, NoUc, NoPuc };

std::string_view variant_name(Variant variant);
Variant parse_variant(std::string_view text);
inline bool trains_publisher_credibility(Variant v) { return v == Variant::Full || v == Variant::NoUc; }
inline bool trains_user_credibility(Variant v) { return v == Variant::Full || v == Variant::NoPc; }

struct ModelConfig {
  std::size_t dim = 100;
  std::size_t heads = 7;
  std::size_t word_dim = 300;
  // Filters per window size; the classifier needs windows * filters == 3 * dim.
  std::size_t filters = 100;
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t max_reposters = 10;
  MaskMode mask_mode = MaskMode::Literal;
  DiffusionPattern diffusion = DiffusionPattern::Chain;
  double init_std = 0.02;
  double word_init_std = 0.02;

  CnnSpec cnn() const { return CnnSpec{windows, filters, word_dim}; }
  void validate() const;
};

// Entity counts without the PAD rows.
struct ModelDims {
  std::size_t publishers = 0;
  std::size_t news = 0;
  std::size_t user_nodes = 0;
  std::size_t vocab = 0;
  std::size_t classes = 0;
  bool operator==(const ModelDims&) const = default;
};

ModelDims dims_of(const Corpus& corpus);

// Registers every model parameter with deterministic initialization.
void init_parameters(Params& params, const ModelConfig& config, const ModelDims& dims, std::uint64_t seed);

// Graph-derived model inputs, indexed by dense news index.
struct GraphInputs {
  Matrix publisher_mask;  // |P| x |N| normalized publishing adjacency
  Matrix user_mask;       // |U'| x |U'| normalized diffusion adjacency
  RepostMatrix reposts;
  std::vector<std::size_t> news_publisher;
  std::vector<std::vector<TokenId>> tokens;
};

GraphInputs build_graph_inputs(const Corpus& corpus, const ModelConfig& config);

// Credibility level per dense publisher index and per user node, if labeled.
struct CredibilityTargets {
  std::vector<std::optional<std::size_t>> publishers;
  std::vector<std::optional<std::size_t>> users;
};

CredibilityTargets credibility_targets(const Corpus& corpus, const CredibilityLabels& labels);

struct Example {
  std::size_t news_index = 0;
  std::size_t label = 0;
};

struct LossTerms {
  double publisher = 0;
  double user = 0;
  double news = 0;
  double regularizer = 0;
  double total = 0;
};

// L_p + L_u + L_n + (lambda / 2) * ||theta||^2 over a batch of labeled news.
// L_p covers the labeled publishers of the batch news, L_u their labeled,
// non-PAD repost slots. Disabled credibility tasks drop their loss and their
// head parameters from the regularizer. With backprop, gradients overwrite the
// store's accumulators.
LossTerms joint_loss(Params& params, const ModelConfig& config, const GraphInputs& inputs,
                     const CredibilityTargets& targets, std::span<const Example> batch, double lambda,
                     Variant variant, bool backprop);

// Class probabilities, one row per requested news index.
Matrix predict_proba(const Params& params, const ModelConfig& config, const GraphInputs& inputs,
                     std::span<const std::size_t> news);

std::vector<std::size_t> argmax_rows(const Matrix& probs);

namespace param_names {
inline constexpr std::string_view kPublisherTable = "emb.publisher";
inline constexpr std::string_view kNewsTable = "emb.news";
inline constexpr std::string_view kUserTable = "emb.user";
inline constexpr std::string_view kWordTable = "emb.word";
inline constexpr std::string_view kPublisherAttention = "attn.publisher";
inline constexpr std::string_view kUserAttention = "attn.user";
inline constexpr std::string_view kPublisherHeadWeight = "head.publisher.weight";
inline constexpr std::string_view kPublisherHeadBias = "head.publisher.bias";
inline constexpr std::string_view kUserHeadWeight = "head.user.weight";
inline constexpr std::string_view kUserHeadBias = "head.user.bias";
inline constexpr std::string_view kFuseWeight = "head.fuse.weight";
inline constexpr std::string_view kFuseBias = "head.fuse.bias";
inline constexpr std::string_view kNewsHeadWeight = "head.news.weight";
inline constexpr std::string_view kNewsHeadBias = "head.news.bias";
}  // namespace param_names

}  // namespace sman
