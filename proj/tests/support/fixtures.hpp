#pragma once

#include <random>
#include <vector>

#include "sman/corpus.hpp"
#include "sman/model.hpp"
#include "sman/training.hpp"

namespace sman::testing {

// 3 publishers, 5 news, 8 users; the last news has no reposts and one has
// more than K = 3 reposters.
inline Corpus tiny_corpus(LabelScheme scheme) {
  const bool four = scheme == LabelScheme::FourClass;
  auto L = [&](NewsLabel four_class, NewsLabel two_class) { return four ? four_class : two_class; };
  std::vector<NewsItem> news{
      {1, 1, {1, 2, 3, 4, 5, 6}, L(NewsLabel::NR, NewsLabel::NR), 100, {{1, 160}, {2, 400}, {3, 900}}},
      {2, 1, {7, 8, 9, 2, 0, 0}, L(NewsLabel::FR, NewsLabel::FR), 200, {{4, 260}, {1, 3000}}},
      {3, 2, {3, 3, 10, 11, 1}, L(NewsLabel::TR, NewsLabel::NR), 300, {{5, 400}, {6, 500}, {7, 600}, {8, 700}}},
      {4, 3, {5, 6, 7, 8, 9, 10, 11}, L(NewsLabel::UR, NewsLabel::FR), 400, {{2, 4000}, {8, 9000}}},
      {5, 2, {11, 4, 2}, L(NewsLabel::FR, NewsLabel::NR), 500, {}},
  };
  return Corpus(std::move(news), scheme, 12);
}

inline ModelConfig tiny_model(MaskMode mode) {
  ModelConfig c;
  c.dim = 4;
  c.heads = 2;
  c.word_dim = 3;
  c.filters = 4;
  c.windows = {3, 4, 5};
  c.max_reposters = 3;
  c.mask_mode = mode;
  c.init_std = 0.5;
  c.word_init_std = 0.5;
  return c;
}

// Fills every parameter (except PAD rows) with Normal(0, scale) draws.
inline void randomize(Params& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& e : params) {
    auto data = e.value.data();
    const std::size_t begin = e.pad_row ? e.value.cols() : 0;
    for (std::size_t i = begin; i < data.size(); ++i) data[i] = normal(rng);
  }
}

inline std::vector<Example> all_examples(const Corpus& corpus) {
  std::vector<Example> out;
  for (std::size_t j = 0; j < corpus.news_count(); ++j) out.push_back({j + 1, class_index(corpus.news()[j].label)});
  return out;
}

inline std::vector<EntityId> all_ids(const Corpus& corpus) {
  std::vector<EntityId> out;
  for (const auto& n : corpus.news()) out.push_back(n.news_id);
  return out;
}

}  // namespace sman::testing
