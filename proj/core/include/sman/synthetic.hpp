#pragma once

#include <cstdint>
#include <vector>

#include "sman/config.hpp"
#include "sman/corpus.hpp"

namespace sman {

// Generator for corpora with a planted credibility signal.
//
// Publishers and users are each drawn reliable with probability
// reliable_fraction. A news item picks a publisher uniformly; it is fake
// (FR/UR, or FR in the two-class scheme) with probability p_signal when the
// publisher is unreliable and 1 - p_signal otherwise. Each reposter comes from
// the matching reputation group (low for fake news, high for genuine news) with
// probability p_signal. Tokens mix a class-specific word block (weight
// text_signal) with uniform draws from the whole vocabulary. Repost delays are
// log-uniform between one minute and time_span seconds.
struct SyntheticConfig {
  std::size_t publishers = 20;
  std::size_t users = 200;
  std::size_t news = 500;
  std::size_t vocab = 2000;
  double reliable_fraction = 0.5;
  double p_signal = 0.95;
  std::size_t max_reposters = 10;
  std::size_t min_reposters = 1;
  std::size_t tokens_min = 10;
  std::size_t tokens_max = 30;
  double text_signal = 0.1;
  Seconds time_span = 86400;
  LabelScheme label_scheme = LabelScheme::FourClass;

  static SyntheticConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  void validate() const;
};

// Hidden reputation assignment behind a generated corpus, indexed by raw id - 1.
struct SyntheticTruth {
  std::vector<bool> reliable_publishers;
  std::vector<bool> reliable_users;
};

Corpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed, SyntheticTruth* truth = nullptr);

}  // namespace sman
