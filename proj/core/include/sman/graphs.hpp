#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sman/corpus.hpp"
#include "sman/tensor.hpp"

namespace sman {

struct SparseEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 1.0;
  bool operator==(const SparseEntry&) const = default;
};

// Sparse adjacency in row-major entry order. Degrees count entries as built,
// so they survive normalization unchanged.
class SparseAdj {
 public:
  SparseAdj() = default;
  // Binary matrix from (row, col) pairs; duplicates collapse.
  SparseAdj(std::size_t rows, std::size_t cols, std::vector<std::pair<std::size_t, std::size_t>> pairs);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<SparseEntry>& entries() const { return entries_; }
  const std::vector<std::size_t>& row_degree() const { return row_degree_; }
  const std::vector<std::size_t>& col_degree() const { return col_degree_; }
  bool contains(std::size_t row, std::size_t col) const;
  double weight(std::size_t row, std::size_t col) const;

  SparseAdj with_weights(std::vector<double> weights) const;

  // Dense copy; with skip_pad, row 0 and column 0 are dropped.
  Tensor<double> to_dense(bool skip_pad = false) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<SparseEntry> entries_;
  std::vector<std::size_t> row_degree_;
  std::vector<std::size_t> col_degree_;
};

enum class DiffusionPattern { Chain, Star };

std::string_view diffusion_pattern_name(DiffusionPattern pattern);
DiffusionPattern parse_diffusion_pattern(std::string_view text);

// (|P|+1) x (|N|+1); entry (p, n) iff publisher p published news n.
SparseAdj build_publishing_adjacency(const Corpus& corpus);

// Node count of the user universe: reposting users 1..|U| followed by one
// node per publisher.
std::size_t user_node_count(const Corpus& corpus);
std::size_t publisher_user_node(const Corpus& corpus, std::size_t publisher_index);

// Symmetric user-user adjacency over user_node_count()+1 nodes. Chain links
// the publisher to the first reposter and consecutive reposters to each other;
// star links the publisher to every reposter.
SparseAdj build_diffusion_adjacency(const Corpus& corpus, DiffusionPattern pattern = DiffusionPattern::Chain);

// weight(i, j) = 1 / sqrt(deg_row(i) * deg_col(j)).
SparseAdj sym_normalize(const SparseAdj& adj);

// Per-news slots of reposting user nodes, chronological and left-padded with 0.
class RepostMatrix {
 public:
  RepostMatrix() = default;
  RepostMatrix(std::size_t rows, std::size_t slots) : slots_(slots), ids_(rows * slots, 0) {}

  std::size_t rows() const { return slots_ ? ids_.size() / slots_ : 0; }
  std::size_t slots() const { return slots_; }
  std::span<const std::size_t> row(std::size_t news_index) const {
    return std::span<const std::size_t>(ids_).subspan(news_index * slots_, slots_);
  }
  std::span<std::size_t> row(std::size_t news_index) {
    return std::span<std::size_t>(ids_).subspan(news_index * slots_, slots_);
  }

 private:
  std::size_t slots_ = 0;
  std::vector<std::size_t> ids_;
};

// |N|+1 rows of K slots; more than K reposters keeps the earliest K.
RepostMatrix build_repost_matrix(const Corpus& corpus, std::size_t slots);

inline constexpr Seconds kUnboundedDelay = std::numeric_limits<Seconds>::max();

// Keeps reposts with time <= publish_time + delay.
Corpus truncate_by_delay(const Corpus& corpus, Seconds delay);

}  // namespace sman
