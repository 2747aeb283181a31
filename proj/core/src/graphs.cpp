#include "sman/graphs.hpp"

#include <algorithm>
#include <cmath>

#include "sman/errors.hpp"

namespace sman {

std::string_view diffusion_pattern_name(DiffusionPattern pattern) {
  return pattern == DiffusionPattern::Chain ? "chain" : "star";
}

DiffusionPattern parse_diffusion_pattern(std::string_view text) {
  if (text == "chain") return DiffusionPattern::Chain;
  if (text == "star") return DiffusionPattern::Star;
  throw ConfigError("unknown diffusion pattern '" + std::string(text) + "'");
}

SparseAdj::SparseAdj(std::size_t rows, std::size_t cols,
                     std::vector<std::pair<std::size_t, std::size_t>> pairs)
    : rows_(rows), cols_(cols), row_degree_(rows, 0), col_degree_(cols, 0) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  entries_.reserve(pairs.size());
  for (auto [r, c] : pairs) {
    if (r >= rows || c >= cols) throw IndexError("adjacency entry outside matrix bounds");
    entries_.push_back({r, c, 1.0});
    ++row_degree_[r];
    ++col_degree_[c];
  }
}

namespace {

auto find_entry(const std::vector<SparseEntry>& entries, std::size_t row, std::size_t col) {
  return std::lower_bound(entries.begin(), entries.end(), std::make_pair(row, col),
                          [](const SparseEntry& e, const std::pair<std::size_t, std::size_t>& key) {
                            return std::make_pair(e.row, e.col) < key;
                          });
}

}  // namespace

bool SparseAdj::contains(std::size_t row, std::size_t col) const {
  auto it = find_entry(entries_, row, col);
  return it != entries_.end() && it->row == row && it->col == col;
}

double SparseAdj::weight(std::size_t row, std::size_t col) const {
  auto it = find_entry(entries_, row, col);
  return it != entries_.end() && it->row == row && it->col == col ? it->weight : 0.0;
}

SparseAdj SparseAdj::with_weights(std::vector<double> weights) const {
  if (weights.size() != entries_.size()) throw ShapeError("with_weights: one weight per entry required");
  SparseAdj out = *this;
  for (std::size_t i = 0; i < weights.size(); ++i) out.entries_[i].weight = weights[i];
  return out;
}

Tensor<double> SparseAdj::to_dense(bool skip_pad) const {
  const std::size_t off = skip_pad ? 1 : 0;
  if (rows_ <= off || cols_ <= off) throw ShapeError("to_dense: matrix has no non-PAD rows or columns");
  Tensor<double> out({rows_ - off, cols_ - off});
  for (const auto& e : entries_) {
    if (e.row < off || e.col < off) continue;
    out(e.row - off, e.col - off) = e.weight;
  }
  return out;
}

SparseAdj build_publishing_adjacency(const Corpus& corpus) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < corpus.news_count(); ++j) {
    pairs.emplace_back(corpus.publishers().index_of(corpus.news()[j].publisher_id), j + 1);
  }
  return SparseAdj(corpus.publishers().size() + 1, corpus.news_count() + 1, std::move(pairs));
}

std::size_t user_node_count(const Corpus& corpus) {
  return corpus.users().size() + corpus.publishers().size();
}

std::size_t publisher_user_node(const Corpus& corpus, std::size_t publisher_index) {
  return corpus.users().size() + publisher_index;
}

namespace {

// Distinct reposting user indices in chronological order.
std::vector<std::size_t> reposter_nodes(const Corpus& corpus, const NewsItem& item) {
  std::vector<std::size_t> nodes;
  for (const auto& r : item.reposts) {
    const auto u = corpus.users().index_of(r.user_id);
    if (std::find(nodes.begin(), nodes.end(), u) == nodes.end()) nodes.push_back(u);
  }
  return nodes;
}

}  // namespace

SparseAdj build_diffusion_adjacency(const Corpus& corpus, DiffusionPattern pattern) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  auto link = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    pairs.emplace_back(a, b);
    pairs.emplace_back(b, a);
  };
  for (const auto& item : corpus.news()) {
    const auto nodes = reposter_nodes(corpus, item);
    if (nodes.empty()) continue;
    const auto source = publisher_user_node(corpus, corpus.publishers().index_of(item.publisher_id));
    if (pattern == DiffusionPattern::Star) {
      for (auto u : nodes) link(source, u);
    } else {
      link(source, nodes.front());
      for (std::size_t i = 1; i < nodes.size(); ++i) link(nodes[i - 1], nodes[i]);
    }
  }
  const auto n = user_node_count(corpus) + 1;
  return SparseAdj(n, n, std::move(pairs));
}

SparseAdj sym_normalize(const SparseAdj& adj) {
  std::vector<double> weights;
  weights.reserve(adj.entries().size());
  for (const auto& e : adj.entries()) {
    const auto dr = adj.row_degree()[e.row];
    const auto dc = adj.col_degree()[e.col];
    weights.push_back(e.weight / std::sqrt(static_cast<double>(dr) * static_cast<double>(dc)));
  }
  return adj.with_weights(std::move(weights));
}

RepostMatrix build_repost_matrix(const Corpus& corpus, std::size_t slots) {
  if (slots == 0) throw ConfigError("build_repost_matrix: K must be at least 1");
  RepostMatrix matrix(corpus.news_count() + 1, slots);
  for (std::size_t j = 0; j < corpus.news_count(); ++j) {
    auto nodes = reposter_nodes(corpus, corpus.news()[j]);
    if (nodes.size() > slots) nodes.resize(slots);
    auto row = matrix.row(j + 1);
    std::copy(nodes.begin(), nodes.end(), row.end() - static_cast<std::ptrdiff_t>(nodes.size()));
  }
  return matrix;
}

Corpus truncate_by_delay(const Corpus& corpus, Seconds delay) {
  if (delay < 0) throw ConfigError("truncate_by_delay: delay must be non-negative");
  std::vector<NewsItem> items = corpus.news();
  for (auto& item : items) {
    const Seconds cutoff =
        delay > kUnboundedDelay - item.publish_time ? kUnboundedDelay : item.publish_time + delay;
    std::erase_if(item.reposts, [cutoff](const Repost& r) { return r.time > cutoff; });
  }
  return Corpus::with_tables_of(corpus, std::move(items));
}

}  // namespace sman
