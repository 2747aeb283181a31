#include "sman/text_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sman/errors.hpp"

namespace sman {

std::size_t CnnSpec::min_length() const {
  return windows.empty() ? 1 : *std::max_element(windows.begin(), windows.end());
}

std::string CnnSpec::kernel_name(std::size_t window) const { return "cnn.kernel." + std::to_string(window); }

std::string CnnSpec::bias_name(std::size_t window) const { return "cnn.bias." + std::to_string(window); }

void CnnSpec::register_params(Params& params, std::mt19937_64& rng) const {
  if (windows.empty() || filters == 0 || word_dim == 0) throw ConfigError("cnn needs windows, filters and word_dim");
  for (auto w : windows) {
    const auto fan_in = w * word_dim;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + filters));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    Matrix kernel({fan_in, filters});
    for (auto& v : kernel.data()) v = uniform(rng);
    params.add(kernel_name(w), std::move(kernel));
    params.add(bias_name(w), Matrix({filters}));
  }
}

CnnWeights bind_cnn(const CnnSpec& spec, RealTape& tape, Params& params) {
  CnnWeights w;
  w.windows = spec.windows;
  for (auto win : spec.windows) {
    w.kernels.push_back(tape.parameter(params.at(spec.kernel_name(win))));
    w.biases.push_back(tape.parameter(params.at(spec.bias_name(win))));
  }
  return w;
}

CnnWeights bind_cnn_frozen(const CnnSpec& spec, RealTape& tape, const Params& params) {
  CnnWeights w;
  w.windows = spec.windows;
  for (auto win : spec.windows) {
    w.kernels.push_back(tape.constant(params.at(spec.kernel_name(win)).value));
    w.biases.push_back(tape.constant(params.at(spec.bias_name(win)).value));
  }
  return w;
}

Node encode_news_text(std::span<const TokenId> tokens, Node word_table, const CnnWeights& weights) {
  const auto vocab = word_table.rows();
  for (auto t : tokens) {
    if (t >= vocab) {
      throw IndexError("encode_news_text: token " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
  std::size_t length = tokens.size();
  while (length > 0 && tokens[length - 1] == 0) --length;

  const auto widest = *std::max_element(weights.windows.begin(), weights.windows.end());
  std::vector<std::size_t> ids(std::max(length, widest), 0);
  std::copy(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(length), ids.begin());
  auto embedded = ad::gather_rows(word_table, std::span<const std::size_t>(ids), true);

  std::vector<Node> pooled;
  pooled.reserve(weights.windows.size());
  for (std::size_t i = 0; i < weights.windows.size(); ++i) {
    const auto w = weights.windows[i];
    auto windows = ad::unfold_windows(embedded, w);
    auto activations = ad::elu(ad::add_bias(ad::matmul(windows, weights.kernels[i]), weights.biases[i]));
    const auto usable = length >= w ? length - w + 1 : 1;
    pooled.push_back(ad::max_rows(activations, usable));
  }
  return pooled.size() == 1 ? pooled.front() : ad::concat_cols<Real>(pooled);
}

void load_word_vectors(const std::filesystem::path& path, Matrix& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vector file " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(text);
    std::size_t index = 0;
    if (!(row >> index)) throw ParseError(line, "expected a word index");
    if (index >= table.rows()) throw IndexError("word index " + std::to_string(index) + " outside vocabulary");
    std::vector<Real> values;
    Real v;
    while (row >> v) values.push_back(v);
    if (values.size() != table.cols()) {
      throw ParseError(line, "expected " + std::to_string(table.cols()) + " values, got " +
                                 std::to_string(values.size()));
    }
    if (index == 0) continue;
    std::copy(values.begin(), values.end(), table.row(index).begin());
  }
}

}  // namespace sman
