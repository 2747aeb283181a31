#include "sman/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sman/errors.hpp"

namespace sman {

void adam_step(Params& params, AdamState& state, const AdamConfig& config, std::uint64_t t) {
  if (t == 0) throw StepError("adam_step: step index starts at 1");
  if (state.first.size() != params.size()) {
    if (!state.first.empty()) throw StepError("adam_step: optimizer state does not match the parameter store");
    for (const auto& e : params) {
      state.first.emplace_back(e.value.shape());
      state.second.emplace_back(e.value.shape());
    }
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  std::size_t k = 0;
  for (auto& e : params) {
    auto value = e.value.data();
    auto grad = e.grad.data();
    auto m = state.first[k].data();
    auto v = state.second[k].data();
    ++k;
    const std::size_t begin = e.pad_row ? e.value.cols() : 0;
    for (std::size_t i = begin; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::size_t> parse_windows(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValueConfig one;
    one.set("w", item);
    out.push_back(one.get_uint("w", 0));
  }
  return out;
}

std::string join_windows(const std::vector<std::size_t>& windows) {
  std::string out;
  for (std::size_t i = 0; i < windows.size(); ++i) out += (i ? "," : "") + std::to_string(windows[i]);
  return out;
}

}  // namespace

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig c;
  auto& m = c.model;
  m.heads = cfg.get_uint("heads", m.heads);
  m.dim = cfg.get_uint("dim", m.dim);
  m.word_dim = cfg.get_uint("word_dim", m.word_dim);
  m.filters = cfg.get_uint("filters", m.filters);
  if (auto w = cfg.find("windows")) m.windows = parse_windows(*w);
  m.max_reposters = cfg.get_uint("max_reposters", m.max_reposters);
  m.mask_mode = parse_mask_mode(cfg.get_string("mask_mode", std::string(mask_mode_name(m.mask_mode))));
  m.diffusion = parse_diffusion_pattern(cfg.get_string("diffusion", std::string(diffusion_pattern_name(m.diffusion))));
  m.init_std = cfg.get_double("init_std", m.init_std);
  m.word_init_std = cfg.get_double("word_init_std", m.word_init_std);
  c.lambda = cfg.get_double("lambda", c.lambda);
  c.adam.learning_rate = cfg.get_double("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = cfg.get_double("beta1", c.adam.beta1);
  c.adam.beta2 = cfg.get_double("beta2", c.adam.beta2);
  c.adam.epsilon = cfg.get_double("epsilon", c.adam.epsilon);
  c.epochs = cfg.get_uint("epochs", c.epochs);
  c.batch_size = cfg.get_uint("batch_size", c.batch_size);
  c.seed = cfg.get_uint("seed", c.seed);
  c.variant = parse_variant(cfg.get_string("variant", std::string(variant_name(c.variant))));
  if (auto s = cfg.find("label_scheme"); s && *s != "auto") c.label_scheme = parse_scheme(*s);
  if (auto v = cfg.find("vocab"); v && *v != "auto") c.vocab = cfg.get_uint("vocab", 0);
  c.word_vectors = cfg.get_string("word_vectors", "");
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("heads", std::to_string(model.heads));
  cfg.set("dim", std::to_string(model.dim));
  cfg.set("word_dim", std::to_string(model.word_dim));
  cfg.set("filters", std::to_string(model.filters));
  cfg.set("windows", join_windows(model.windows));
  cfg.set("max_reposters", std::to_string(model.max_reposters));
  cfg.set("mask_mode", std::string(mask_mode_name(model.mask_mode)));
  cfg.set("diffusion", std::string(diffusion_pattern_name(model.diffusion)));
  cfg.set("init_std", format_double(model.init_std));
  cfg.set("word_init_std", format_double(model.word_init_std));
  cfg.set("lambda", format_double(lambda));
  cfg.set("learning_rate", format_double(adam.learning_rate));
  cfg.set("beta1", format_double(adam.beta1));
  cfg.set("beta2", format_double(adam.beta2));
  cfg.set("epsilon", format_double(adam.epsilon));
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("batch_size", std::to_string(batch_size));
  cfg.set("seed", std::to_string(seed));
  cfg.set("variant", std::string(variant_name(variant)));
  cfg.set("label_scheme", label_scheme ? std::string(scheme_name(*label_scheme)) : "auto");
  cfg.set("vocab", vocab ? std::to_string(*vocab) : "auto");
  cfg.set("word_vectors", word_vectors);
  return cfg;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda >= 0)) throw ConfigError("lambda must be non-negative");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(adam.learning_rate > 0) || !(adam.epsilon > 0)) throw ConfigError("learning_rate and epsilon must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

void TrainConfig::check_corpus(const Corpus& corpus) const {
  validate();
  if (label_scheme && *label_scheme != corpus.label_scheme()) {
    throw ConfigError("config expects a " + std::string(scheme_name(*label_scheme)) + " corpus, got " +
                      std::string(scheme_name(corpus.label_scheme())));
  }
  if (vocab && *vocab != corpus.vocab_size()) {
    throw ConfigError("config vocab " + std::to_string(*vocab) + " does not match corpus vocab " +
                      std::to_string(corpus.vocab_size()));
  }
}

std::vector<Example> examples_for(const Corpus& corpus, const std::vector<EntityId>& ids) {
  std::vector<Example> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back({corpus.news_index(id), class_index(corpus.item(id).label)});
  return out;
}

void round_to_float(Params& params) {
  for (auto& e : params) {
    for (auto& v : e.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

namespace {

double accuracy_on(const Params& params, const ModelConfig& model, const GraphInputs& inputs,
                   const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::vector<std::size_t> news;
  for (const auto& ex : examples) news.push_back(ex.news_index);
  const auto predicted = argmax_rows(predict_proba(params, model, inputs, news));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) hits += predicted[i] == examples[i].label;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

}  // namespace

Checkpoint train(const Corpus& corpus, const Split& split, const CredibilityLabels& labels,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  config.check_corpus(corpus);
  const auto train_examples = examples_for(corpus, split.train);
  if (train_examples.empty()) throw EmptyBatchError("train: the training split is empty");
  const auto validation_examples = examples_for(corpus, split.validation);

  Checkpoint best;
  best.config = config;
  best.dims = dims_of(corpus);
  best.split = split;
  Params params;
  init_parameters(params, config.model, best.dims, config.seed);
  if (!config.word_vectors.empty()) load_word_vectors(config.word_vectors, params.at(param_names::kWordTable).value);
  round_to_float(params);

  const auto inputs = build_graph_inputs(corpus, config.model);
  const auto targets = credibility_targets(corpus, labels);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_examples.size());
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;
  std::uint64_t step = 0;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      std::vector<Example> batch;
      for (auto i = start; i < stop; ++i) batch.push_back(train_examples[order[i]]);
      const auto terms = joint_loss(params, config.model, inputs, targets, batch, config.lambda, config.variant, true);
      adam_step(params, adam, config.adam, ++step);
      loss_sum += terms.total;
    }

    Params snapshot = params;
    round_to_float(snapshot);
    EpochRecord record{epoch, loss_sum / static_cast<double>(train_examples.size()),
                       accuracy_on(snapshot, config.model, inputs, validation_examples)};
    best.history.push_back(record);
    if (!have_best || record.validation_accuracy > best.validation_accuracy) {
      have_best = true;
      best.epoch = epoch;
      best.validation_accuracy = record.validation_accuracy;
      best.params = std::move(snapshot);
    }
    if (on_epoch) on_epoch(record);
  }
  return best;
}

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kManifestFile = "checkpoint.json";
constexpr const char* kBlobFile = "params.bin";
constexpr int kFormatVersion = 1;

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  json cfg = json::object();
  const auto resolved = checkpoint.config.to_config();
  for (const auto& [k, v] : resolved.values()) cfg[k] = v;
  manifest["config"] = cfg;
  manifest["dims"] = {{"publishers", checkpoint.dims.publishers},
                      {"news", checkpoint.dims.news},
                      {"user_nodes", checkpoint.dims.user_nodes},
                      {"vocab", checkpoint.dims.vocab},
                      {"classes", checkpoint.dims.classes}};
  manifest["epoch"] = checkpoint.epoch;
  manifest["validation_accuracy"] = checkpoint.validation_accuracy;
  json history = json::array();
  for (const auto& r : checkpoint.history) {
    history.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"validation_accuracy", r.validation_accuracy}});
  }
  manifest["history"] = history;
  manifest["split"] = {{"train", checkpoint.split.train},
                       {"validation", checkpoint.split.validation},
                       {"test", checkpoint.split.test}};
  manifest["data_path"] = checkpoint.data_path;

  std::string blob;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& e : checkpoint.params) {
    tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset}, {"pad_row", e.pad_row}});
    for (double v : e.value.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
    offset += e.value.size();
  }
  manifest["parameters"] = tensors;

  write_atomically(dir / kBlobFile, blob);
  write_atomically(dir / kManifestFile, manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  if (!std::filesystem::exists(manifest_path)) throw IoError("no checkpoint at " + dir.string());
  Checkpoint c;
  try {
    const auto manifest = json::parse(read_file(manifest_path));
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    KeyValueConfig cfg;
    for (const auto& [k, v] : manifest.at("config").items()) cfg.set(k, v.get<std::string>());
    c.config = TrainConfig::from_config(cfg);
    const auto& d = manifest.at("dims");
    c.dims = {d.at("publishers").get<std::size_t>(), d.at("news").get<std::size_t>(),
              d.at("user_nodes").get<std::size_t>(), d.at("vocab").get<std::size_t>(),
              d.at("classes").get<std::size_t>()};
    c.epoch = manifest.at("epoch").get<std::size_t>();
    c.validation_accuracy = manifest.at("validation_accuracy").get<double>();
    for (const auto& r : manifest.at("history")) {
      c.history.push_back({r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(),
                           r.at("validation_accuracy").get<double>()});
    }
    const auto& s = manifest.at("split");
    c.split.train = s.at("train").get<std::vector<EntityId>>();
    c.split.validation = s.at("validation").get<std::vector<EntityId>>();
    c.split.test = s.at("test").get<std::vector<EntityId>>();
    c.data_path = manifest.at("data_path").get<std::string>();

    const auto blob = read_file(dir / kBlobFile);
    for (const auto& t : manifest.at("parameters")) {
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      Matrix value(shape);
      if ((offset + value.size()) * 4 > blob.size()) throw DataError("params.bin is truncated");
      auto data = value.data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[(offset + i) * 4 + b])) << (8 * b);
        }
        data[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
      c.params.add(t.at("name").get<std::string>(), std::move(value), t.at("pad_row").get<bool>());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + manifest_path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace sman
