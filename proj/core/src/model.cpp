#include "sman/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "sman/errors.hpp"
#include "sman/heads.hpp"

namespace sman {

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::Full: return "full";
    case Variant::NoPc: return "no-pc";
    case Variant::NoUc: return "no-uc";
    case Variant::NoPuc: return "no-puc";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "full") return Variant::Full;
  if (text == "no-pc") return Variant::NoPc;
  if (text == "no-uc") return Variant::NoUc;
  if (text == "no-puc") return Variant::NoPuc;
  throw ConfigError("unknown variant '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (dim == 0 || heads == 0 || word_dim == 0 || filters == 0) {
    throw ConfigError("dim, heads, word_dim and filters must be positive");
  }
  if (windows.empty() || std::find(windows.begin(), windows.end(), 0u) != windows.end()) {
    throw ConfigError("cnn windows must be positive");
  }
  if (windows.size() * filters != 3 * dim) {
    throw ConfigError("cnn output (" + std::to_string(windows.size() * filters) + ") must equal 3 * dim (" +
                      std::to_string(3 * dim) + ")");
  }
  if (max_reposters == 0) throw ConfigError("max_reposters must be at least 1");
  if (!(init_std > 0) || !(word_init_std >= 0)) throw ConfigError("initialization scales must be positive");
}

ModelDims dims_of(const Corpus& corpus) {
  return ModelDims{corpus.publishers().size(), corpus.news_count(), user_node_count(corpus), corpus.vocab_size(),
                   class_count(corpus.label_scheme())};
}

namespace {

Matrix normal_table(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng, bool pad_row) {
  Matrix m({rows, cols});
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : m.data()) v = stddev > 0 ? normal(rng) : 0.0;
  if (pad_row) std::fill(m.row(0).begin(), m.row(0).end(), 0.0);
  return m;
}

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  Matrix m({rows, cols});
  for (auto& v : m.data()) v = uniform(rng);
  return m;
}

AttentionBlock publisher_block(const ModelConfig& c) {
  return {std::string(param_names::kPublisherAttention), c.heads, c.dim, c.mask_mode};
}

AttentionBlock user_block(const ModelConfig& c) {
  return {std::string(param_names::kUserAttention), c.heads, c.dim, c.mask_mode};
}

}  // namespace

void init_parameters(Params& params, const ModelConfig& config, const ModelDims& dims, std::uint64_t seed) {
  config.validate();
  if (dims.publishers == 0 || dims.news == 0 || dims.user_nodes == 0 || dims.vocab == 0) {
    throw ConfigError("model needs at least one publisher, news item, user node and word");
  }
  using namespace param_names;
  std::mt19937_64 rng(seed);
  const auto d = config.dim;
  params.add(std::string(kPublisherTable), normal_table(dims.publishers + 1, d, config.init_std, rng, true), true);
  params.add(std::string(kNewsTable), normal_table(dims.news + 1, d, config.init_std, rng, true), true);
  params.add(std::string(kUserTable), normal_table(dims.user_nodes + 1, d, config.init_std, rng, true), true);
  params.add(std::string(kWordTable), normal_table(dims.vocab, config.word_dim, config.word_init_std, rng, true), true);
  publisher_block(config).register_params(params, rng, config.init_std);
  user_block(config).register_params(params, rng, config.init_std);
  config.cnn().register_params(params, rng);
  params.add(std::string(kPublisherHeadWeight), glorot(d, kCredibilityLevels, rng));
  params.add(std::string(kPublisherHeadBias), Matrix({kCredibilityLevels}));
  params.add(std::string(kUserHeadWeight), glorot(d, kCredibilityLevels, rng));
  params.add(std::string(kUserHeadBias), Matrix({kCredibilityLevels}));
  params.add(std::string(kFuseWeight), glorot(4 * d, d, rng));
  params.add(std::string(kFuseBias), Matrix({d}));
  params.add(std::string(kNewsHeadWeight), glorot(4 * d, dims.classes, rng));
  params.add(std::string(kNewsHeadBias), Matrix({dims.classes}));
}

GraphInputs build_graph_inputs(const Corpus& corpus, const ModelConfig& config) {
  GraphInputs in;
  in.publisher_mask = sym_normalize(build_publishing_adjacency(corpus)).to_dense(true);
  in.user_mask = sym_normalize(build_diffusion_adjacency(corpus, config.diffusion)).to_dense(true);
  in.reposts = build_repost_matrix(corpus, config.max_reposters);
  in.news_publisher.assign(corpus.news_count() + 1, 0);
  in.tokens.assign(corpus.news_count() + 1, {});
  for (std::size_t j = 0; j < corpus.news_count(); ++j) {
    const auto& item = corpus.news()[j];
    in.news_publisher[j + 1] = corpus.publishers().index_of(item.publisher_id);
    in.tokens[j + 1] = item.tokens;
  }
  return in;
}

CredibilityTargets credibility_targets(const Corpus& corpus, const CredibilityLabels& labels) {
  CredibilityTargets t;
  t.publishers.assign(corpus.publishers().size() + 1, std::nullopt);
  t.users.assign(user_node_count(corpus) + 1, std::nullopt);
  for (const auto& [id, level] : labels.publishers) {
    if (corpus.publishers().contains(id)) t.publishers[corpus.publishers().index_of(id)] = static_cast<std::size_t>(level);
  }
  for (const auto& [id, level] : labels.users) {
    if (corpus.users().contains(id)) t.users[corpus.users().index_of(id)] = static_cast<std::size_t>(level);
  }
  return t;
}

namespace {

struct Bound {
  Node publishers, news, users, words;
  AttentionWeights publisher_attention, user_attention;
  CnnWeights cnn;
  Node publisher_w, publisher_b, user_w, user_b, fuse_w, fuse_b, news_w, news_b;
};

template <typename Bind, typename BindBlock, typename BindCnn>
Bound bind_all(const ModelConfig& config, Bind bind, BindBlock bind_block, BindCnn bind_cnn_fn) {
  using namespace param_names;
  Bound b;
  b.publishers = bind(kPublisherTable);
  b.news = bind(kNewsTable);
  b.users = bind(kUserTable);
  b.words = bind(kWordTable);
  b.publisher_attention = bind_block(publisher_block(config));
  b.user_attention = bind_block(user_block(config));
  b.cnn = bind_cnn_fn(config.cnn());
  b.publisher_w = bind(kPublisherHeadWeight);
  b.publisher_b = bind(kPublisherHeadBias);
  b.user_w = bind(kUserHeadWeight);
  b.user_b = bind(kUserHeadBias);
  b.fuse_w = bind(kFuseWeight);
  b.fuse_b = bind(kFuseBias);
  b.news_w = bind(kNewsHeadWeight);
  b.news_b = bind(kNewsHeadBias);
  return b;
}

Bound bind_trainable(RealTape& tape, Params& params, const ModelConfig& config) {
  return bind_all(
      config, [&](std::string_view name) { return tape.parameter(params.at(name)); },
      [&](const AttentionBlock& block) { return block.bind(tape, params); },
      [&](const CnnSpec& spec) { return bind_cnn(spec, tape, params); });
}

Bound bind_frozen(RealTape& tape, const Params& params, const ModelConfig& config) {
  return bind_all(
      config, [&](std::string_view name) { return tape.constant(params.at(name).value); },
      [&](const AttentionBlock& block) { return block.bind_frozen(tape, params); },
      [&](const CnnSpec& spec) { return bind_cnn_frozen(spec, tape, params); });
}

struct Encoded {
  Node publishers;
  Node users;
};

Encoded encode_graphs(const Bound& b, const ModelConfig& config, const GraphInputs& in) {
  return {encode_publishers(b.publisher_attention, b.publishers, b.news, in.publisher_mask, config.mask_mode),
          encode_users(b.user_attention, b.users, in.user_mask, config.mask_mode)};
}

void check_dims(const Bound& b, const GraphInputs& in) {
  if (in.publisher_mask.rows() + 1 != b.publishers.rows() || in.publisher_mask.cols() + 1 != b.news.rows() ||
      in.user_mask.rows() + 1 != b.users.rows()) {
    throw ConfigError("graph inputs do not match the model's entity tables");
  }
}

Node news_probabilities(const Bound& b, const Encoded& enc, const GraphInputs& in, std::span<const std::size_t> news) {
  auto* tape = b.news.tape;
  std::vector<Node> content, reposters;
  std::vector<std::size_t> publishers;
  content.reserve(news.size());
  reposters.reserve(news.size());
  for (auto n : news) {
    if (n == 0 || n >= in.tokens.size()) throw IndexError("news index " + std::to_string(n) + " out of range");
    content.push_back(encode_news_text(in.tokens[n], b.words, b.cnn));
    publishers.push_back(in.news_publisher[n]);

    const auto slots = in.reposts.row(n);
    Matrix mask({1, slots.size()});
    bool any = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      mask[k] = slots[k] != 0 ? 1.0 : 0.0;
      any = any || slots[k] != 0;
    }
    if (!any) {
      reposters.push_back(tape->constant(Matrix({1, b.news.cols()})));
      continue;
    }
    const std::size_t row_index[] = {n};
    auto news_row = ad::gather_rows(b.news, std::span<const std::size_t>(row_index), true);
    auto slot_reps = ad::gather_rows(enc.users, slots, true);
    reposters.push_back(aggregate_reposters(news_row, slot_reps, mask));
  }
  auto content_rows = ad::concat_rows<Real>(content);
  auto reposter_rows = ad::concat_rows<Real>(reposters);
  auto publisher_rows = ad::gather_rows(enc.publishers, std::span<const std::size_t>(publishers), true);
  auto fused = fuse(publisher_rows, reposter_rows, b.fuse_w, b.fuse_b);
  return classify_news(content_rows, fused, b.news_w, b.news_b);
}

}  // namespace

LossTerms joint_loss(Params& params, const ModelConfig& config, const GraphInputs& inputs,
                     const CredibilityTargets& targets, std::span<const Example> batch, double lambda,
                     Variant variant, bool backprop) {
  if (batch.empty()) throw EmptyBatchError("joint_loss: batch has no labeled news");
  if (lambda < 0) throw ConfigError("joint_loss: lambda must be non-negative");

  RealTape tape;
  const auto b = bind_trainable(tape, params, config);
  check_dims(b, inputs);
  const auto enc = encode_graphs(b, config, inputs);

  std::vector<std::size_t> news, labels;
  for (const auto& ex : batch) {
    news.push_back(ex.news_index);
    labels.push_back(ex.label);
  }
  LossTerms terms;
  std::vector<Node> parts;
  auto news_loss = ad::nll(news_probabilities(b, enc, inputs, news), std::span<const std::size_t>(labels));
  terms.news = news_loss.value()[0];
  parts.push_back(news_loss);

  if (trains_publisher_credibility(variant)) {
    std::set<std::size_t> seen;
    std::vector<std::size_t> rows, levels;
    for (auto n : news) {
      const auto p = inputs.news_publisher[n];
      if (!seen.insert(p).second || !targets.publishers.at(p)) continue;
      rows.push_back(p);
      levels.push_back(*targets.publishers[p]);
    }
    if (!rows.empty()) {
      auto reps = ad::gather_rows(enc.publishers, std::span<const std::size_t>(rows), true);
      auto loss = ad::nll(publisher_credibility(reps, b.publisher_w, b.publisher_b), std::span<const std::size_t>(levels));
      terms.publisher = loss.value()[0];
      parts.push_back(loss);
    }
  }

  if (trains_user_credibility(variant)) {
    std::vector<std::size_t> rows, levels;
    for (auto n : news) {
      for (auto u : inputs.reposts.row(n)) {
        if (u == 0 || !targets.users.at(u)) continue;
        rows.push_back(u);
        levels.push_back(*targets.users[u]);
      }
    }
    if (!rows.empty()) {
      auto reps = ad::gather_rows(enc.users, std::span<const std::size_t>(rows), true);
      auto loss = ad::nll(user_credibility(reps, b.user_w, b.user_b), std::span<const std::size_t>(levels));
      terms.user = loss.value()[0];
      parts.push_back(loss);
    }
  }

  if (lambda > 0) {
    const std::set<std::string_view> inactive = [&] {
      std::set<std::string_view> out;
      using namespace param_names;
      if (!trains_publisher_credibility(variant)) out.insert({kPublisherHeadWeight, kPublisherHeadBias});
      if (!trains_user_credibility(variant)) out.insert({kUserHeadWeight, kUserHeadBias});
      return out;
    }();
    std::vector<Node> squares;
    for (auto& e : params) {
      if (inactive.contains(e.name)) continue;
      squares.push_back(ad::sum_squares(tape.parameter(e)));
    }
    auto reg = ad::scale(ad::sum<Real>(squares), lambda / 2.0);
    terms.regularizer = reg.value()[0];
    parts.push_back(reg);
  }

  auto total = ad::sum<Real>(parts);
  terms.total = total.value()[0];
  if (backprop) {
    params.zero_grad();
    tape.backward(total);
  }
  return terms;
}

Matrix predict_proba(const Params& params, const ModelConfig& config, const GraphInputs& inputs,
                     std::span<const std::size_t> news) {
  if (news.empty()) throw ShapeError("predict_proba: no news requested");
  RealTape tape;
  const auto b = bind_frozen(tape, params, config);
  check_dims(b, inputs);
  const auto enc = encode_graphs(b, config, inputs);
  return news_probabilities(b, enc, inputs, news).value();
}

std::vector<std::size_t> argmax_rows(const Matrix& probs) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

}  // namespace sman
