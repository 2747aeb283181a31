#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sman/config.hpp"
#include "sman/corpus.hpp"
#include "sman/model.hpp"

namespace sman {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments, one pair per parameter in store order.
struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

// One bias-corrected Adam update at step t (1-based). PAD rows are left alone.
void adam_step(Params& params, AdamState& state, const AdamConfig& config, std::uint64_t t);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  double lambda = 1e-6;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Variant variant = Variant::Full;
  // Expected corpus properties; unset means "whatever the corpus has".
  std::optional<LabelScheme> label_scheme;
  std::optional<std::size_t> vocab;
  std::string word_vectors;

  // Keys: heads, dim, word_dim, filters, windows, max_reposters, mask_mode,
  // diffusion, init_std, word_init_std, lambda, learning_rate, beta1, beta2,
  // epsilon, epochs, batch_size, seed, variant, label_scheme, vocab,
  // word_vectors.
  static TrainConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  void validate() const;
  // Throws ConfigError when the corpus does not fit the configuration.
  void check_corpus(const Corpus& corpus) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double validation_accuracy = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  ModelDims dims;
  std::size_t epoch = 0;  // 1-based epoch of the kept parameters
  double validation_accuracy = 0;
  std::vector<EpochRecord> history;
  Split split;
  std::string data_path;
  // Values are representable in 32 bits, so a saved checkpoint reloads exactly.
  Params params;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch joint-loss optimization; keeps the parameters of the epoch with
// the best validation accuracy (earliest on ties). Credibility labels must come
// from the training split.
Checkpoint train(const Corpus& corpus, const Split& split, const CredibilityLabels& labels,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

// Examples (dense news index, class) for a list of news ids.
std::vector<Example> examples_for(const Corpus& corpus, const std::vector<EntityId>& ids);

// Rounds every parameter value to the nearest 32-bit float.
void round_to_float(Params& params);

// Writes checkpoint.json and params.bin into `dir`, creating it if needed.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sman
