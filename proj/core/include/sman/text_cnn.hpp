#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "sman/attention.hpp"
#include "sman/corpus.hpp"

namespace sman {

struct CnnSpec {
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t filters = 100;  // per window size
  std::size_t word_dim = 300;

  std::size_t output_dim() const { return windows.size() * filters; }
  std::size_t min_length() const;
  std::string kernel_name(std::size_t window) const;
  std::string bias_name(std::size_t window) const;
  void register_params(Params& params, std::mt19937_64& rng) const;
};

struct CnnWeights {
  std::vector<std::size_t> windows;
  std::vector<Node> kernels;  // (window * word_dim) x filters
  std::vector<Node> biases;   // filters
};

CnnWeights bind_cnn(const CnnSpec& spec, RealTape& tape, Params& params);
CnnWeights bind_cnn_frozen(const CnnSpec& spec, RealTape& tape, const Params& params);

// Valid-mode convolution per window size, ELU, then max over time; the pooled
// values of all windows are concatenated into one 1 x output_dim row.
// Trailing PAD tokens (id 0) are padding: pooling only covers windows that
// start within the real tokens and fit before the padding, and sequences are
// right-padded to the largest window.
Node encode_news_text(std::span<const TokenId> tokens, Node word_table, const CnnWeights& weights);

// Text file with one word per line: index followed by word_dim values. Rows
// not listed keep their current values; row 0 stays zero.
void load_word_vectors(const std::filesystem::path& path, Matrix& table);

}  // namespace sman
