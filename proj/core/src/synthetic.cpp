#include "sman/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sman/errors.hpp"

namespace sman {

SyntheticConfig SyntheticConfig::from_config(const KeyValueConfig& cfg) {
  SyntheticConfig c;
  c.publishers = cfg.get_uint("publishers", c.publishers);
  c.users = cfg.get_uint("users", c.users);
  c.news = cfg.get_uint("news", c.news);
  c.vocab = cfg.get_uint("vocab", c.vocab);
  c.reliable_fraction = cfg.get_double("reliable_fraction", c.reliable_fraction);
  c.p_signal = cfg.get_double("p_signal", c.p_signal);
  c.max_reposters = cfg.get_uint("max_reposters", c.max_reposters);
  c.min_reposters = cfg.get_uint("min_reposters", c.min_reposters);
  c.tokens_min = cfg.get_uint("tokens_min", c.tokens_min);
  c.tokens_max = cfg.get_uint("tokens_max", c.tokens_max);
  c.text_signal = cfg.get_double("text_signal", c.text_signal);
  c.time_span = cfg.get_int("time_span", c.time_span);
  c.label_scheme = parse_scheme(cfg.get_string("label_scheme", std::string(scheme_name(c.label_scheme))));
  c.validate();
  return c;
}

KeyValueConfig SyntheticConfig::to_config() const {
  KeyValueConfig cfg;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  cfg.set("publishers", std::to_string(publishers));
  cfg.set("users", std::to_string(users));
  cfg.set("news", std::to_string(news));
  cfg.set("vocab", std::to_string(vocab));
  cfg.set("reliable_fraction", num(reliable_fraction));
  cfg.set("p_signal", num(p_signal));
  cfg.set("max_reposters", std::to_string(max_reposters));
  cfg.set("min_reposters", std::to_string(min_reposters));
  cfg.set("tokens_min", std::to_string(tokens_min));
  cfg.set("tokens_max", std::to_string(tokens_max));
  cfg.set("text_signal", num(text_signal));
  cfg.set("time_span", std::to_string(time_span));
  cfg.set("label_scheme", std::string(scheme_name(label_scheme)));
  return cfg;
}

void SyntheticConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(p_signal >= 0.5 && p_signal <= 1.0)) throw ConfigError("p_signal must lie in [0.5, 1]");
  if (!prob(reliable_fraction)) throw ConfigError("reliable_fraction must lie in [0, 1]");
  if (!prob(text_signal)) throw ConfigError("text_signal must lie in [0, 1]");
  if (publishers == 0 || users == 0 || news == 0) throw ConfigError("entity counts must be positive");
  if (vocab < 2 * class_count(label_scheme) + 1) throw ConfigError("vocab too small for class word blocks");
  if (max_reposters == 0 || min_reposters > max_reposters) {
    throw ConfigError("need 0 <= min_reposters <= max_reposters and max_reposters >= 1");
  }
  if (max_reposters > users) throw ConfigError("max_reposters exceeds the number of users");
  if (tokens_max == 0 || tokens_min > tokens_max) throw ConfigError("invalid token length range");
  if (time_span < 60) throw ConfigError("time_span must be at least 60 seconds");
}

Corpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed, SyntheticTruth* truth) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p) { return unit(rng) < p; };
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<bool> reliable_publisher(config.publishers);
  for (std::size_t i = 0; i < config.publishers; ++i) reliable_publisher[i] = coin(config.reliable_fraction);

  // Reputation groups of user ids.
  std::vector<EntityId> high, low;
  for (std::size_t u = 1; u <= config.users; ++u) (coin(config.reliable_fraction) ? high : low).push_back(u);
  if (truth) {
    truth->reliable_publishers = reliable_publisher;
    truth->reliable_users.assign(config.users, false);
    for (auto u : high) truth->reliable_users[u - 1] = true;
  }

  const std::size_t classes = class_count(config.label_scheme);
  // Words 1..vocab-1; class c owns a block of consecutive ids.
  const std::size_t block = std::max<std::size_t>(1, (config.vocab - 1) / (2 * classes));
  const Seconds horizon = 30 * 86400;
  const double log_lo = std::log(60.0);
  const double log_hi = std::log(static_cast<double>(config.time_span));

  std::vector<NewsItem> items;
  items.reserve(config.news);
  for (std::size_t j = 0; j < config.news; ++j) {
    NewsItem item;
    item.news_id = j + 1;
    const auto publisher = pick(config.publishers);
    item.publisher_id = publisher + 1;

    const double p_fake = reliable_publisher[publisher] ? 1.0 - config.p_signal : config.p_signal;
    const bool fake = coin(p_fake);
    if (config.label_scheme == LabelScheme::TwoClass) {
      item.label = fake ? NewsLabel::FR : NewsLabel::NR;
    } else {
      const bool second = coin(0.5);
      item.label = fake ? (second ? NewsLabel::UR : NewsLabel::FR) : (second ? NewsLabel::TR : NewsLabel::NR);
    }

    const auto length = config.tokens_min + pick(config.tokens_max - config.tokens_min + 1);
    const std::size_t block_start = 1 + class_index(item.label) * block;
    for (std::size_t t = 0; t < length; ++t) {
      const auto word = coin(config.text_signal) ? block_start + pick(block) : 1 + pick(config.vocab - 1);
      item.tokens.push_back(static_cast<TokenId>(word));
    }

    item.publish_time = static_cast<Seconds>(pick(static_cast<std::size_t>(horizon)));
    const auto count = config.min_reposters + pick(config.max_reposters - config.min_reposters + 1);
    std::vector<EntityId> chosen;
    // Fake news draws preferentially from the low-reputation group; a group
    // whose members are all taken falls back to the other one.
    const auto& primary = fake ? low : high;
    const auto& secondary = fake ? high : low;
    auto remaining = [&](const std::vector<EntityId>& group) {
      std::vector<EntityId> out;
      for (auto u : group)
        if (std::find(chosen.begin(), chosen.end(), u) == chosen.end()) out.push_back(u);
      return out;
    };
    while (chosen.size() < count) {
      const bool preferred = coin(config.p_signal);
      auto pool = remaining(preferred ? primary : secondary);
      if (pool.empty()) pool = remaining(preferred ? secondary : primary);
      chosen.push_back(pool[pick(pool.size())]);
    }
    std::vector<Seconds> delays;
    for (std::size_t r = 0; r < count; ++r) {
      delays.push_back(static_cast<Seconds>(std::exp(log_lo + (log_hi - log_lo) * unit(rng))));
    }
    std::sort(delays.begin(), delays.end());
    for (std::size_t r = 0; r < count; ++r) item.reposts.push_back({chosen[r], item.publish_time + delays[r]});
    items.push_back(std::move(item));
  }
  return Corpus(std::move(items), config.label_scheme, config.vocab);
}

}  // namespace sman
