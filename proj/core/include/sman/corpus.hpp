#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sman {

// Raw identifier as found in a corpus file. 0 is the reserved PAD sentinel.
using EntityId = std::uint64_t;
using Seconds = std::int64_t;
using TokenId = std::uint32_t;

enum class LabelScheme { FourClass, TwoClass };

// Class indices double as the label's integer value: NR/FR are shared by both
// schemes, TR/UR exist only in the four-class scheme.
enum class NewsLabel : std::uint8_t { NR = 0, FR = 1, TR = 2, UR = 3 };

std::size_t class_count(LabelScheme scheme);
std::string_view scheme_name(LabelScheme scheme);
LabelScheme parse_scheme(std::string_view text);
std::string_view label_name(NewsLabel label);
std::optional<NewsLabel> parse_label(std::string_view text);
inline std::size_t class_index(NewsLabel label) { return static_cast<std::size_t>(label); }
inline bool is_fake(NewsLabel label) { return label == NewsLabel::FR || label == NewsLabel::UR; }

struct Repost {
  EntityId user_id = 0;
  Seconds time = 0;
  bool operator==(const Repost&) const = default;
};

struct NewsItem {
  EntityId news_id = 0;
  EntityId publisher_id = 0;
  std::vector<TokenId> tokens;
  NewsLabel label = NewsLabel::NR;
  Seconds publish_time = 0;
  // Chronological.
  std::vector<Repost> reposts;
  bool operator==(const NewsItem&) const = default;
};

// Maps raw ids to dense indices 1..size(); index 0 is PAD.
class IndexTable {
 public:
  IndexTable() = default;
  // Ids are sorted so the assignment does not depend on record order.
  explicit IndexTable(std::vector<EntityId> ids);

  std::size_t size() const { return ids_.size(); }
  bool contains(EntityId id) const;
  std::size_t index_of(EntityId id) const;
  EntityId id_at(std::size_t index) const { return ids_.at(index - 1); }
  const std::vector<EntityId>& ids() const { return ids_; }

 private:
  std::vector<EntityId> ids_;
};

class Corpus {
 public:
  Corpus() = default;
  // Validates all records and builds the index tables. vocab_size 0 means
  // "one past the largest token seen".
  Corpus(std::vector<NewsItem> news, LabelScheme scheme, std::size_t vocab_size = 0);

  // Same scheme, vocabulary and index tables as `base` over a different set of
  // records (e.g. with reposts removed). Every referenced id must already be
  // indexed by `base`.
  static Corpus with_tables_of(const Corpus& base, std::vector<NewsItem> news);

  const std::vector<NewsItem>& news() const { return news_; }
  LabelScheme label_scheme() const { return scheme_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const IndexTable& publishers() const { return publishers_; }
  const IndexTable& users() const { return users_; }

  std::size_t news_count() const { return news_.size(); }
  // Dense news index: position in news() plus one.
  std::size_t news_index(EntityId news_id) const;
  const NewsItem& item(EntityId news_id) const { return news_[news_index(news_id) - 1]; }
  bool contains_news(EntityId news_id) const { return news_pos_.contains(news_id); }

 private:
  std::vector<NewsItem> news_;
  LabelScheme scheme_ = LabelScheme::FourClass;
  std::size_t vocab_size_ = 0;
  IndexTable publishers_;
  IndexTable users_;
  std::map<EntityId, std::size_t> news_pos_;
};

// One JSON object per line. An optional first line without "news_id" carries
// corpus metadata: {"label_scheme": "4-class"|"2-class", "vocab_size": N}.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::istream& in);
void write_corpus(const Corpus& corpus, std::ostream& out);
std::string format_record(const NewsItem& item);

struct Split {
  std::vector<EntityId> train;
  std::vector<EntityId> validation;
  std::vector<EntityId> test;
};

// Stratified by class: validation = floor(n/10), test = floor(rest/4),
// train = remainder.
Split split_corpus(const Corpus& corpus, std::uint64_t seed);

enum class Credibility : std::uint8_t { Reliable = 0, Uncertain = 1, Unreliable = 2 };
inline constexpr std::size_t kCredibilityLevels = 3;

// Entities without training-set history are absent from the maps.
struct CredibilityLabels {
  std::map<EntityId, Credibility> publishers;
  std::map<EntityId, Credibility> users;
};

Credibility credibility_from_history(const std::vector<NewsLabel>& history);

// Publishers are judged by the training news they published, users by the
// training news they reposted.
CredibilityLabels annotate_credibility(const Corpus& corpus, const std::vector<EntityId>& train_ids);

}  // namespace sman
