#include "sman/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sman/errors.hpp"

namespace sman {

std::size_t class_count(LabelScheme scheme) { return scheme == LabelScheme::FourClass ? 4 : 2; }

std::string_view scheme_name(LabelScheme scheme) {
  return scheme == LabelScheme::FourClass ? "4-class" : "2-class";
}

LabelScheme parse_scheme(std::string_view text) {
  if (text == "4-class" || text == "4") return LabelScheme::FourClass;
  if (text == "2-class" || text == "2") return LabelScheme::TwoClass;
  throw ConfigError("unknown label scheme '" + std::string(text) + "'");
}

std::string_view label_name(NewsLabel label) {
  switch (label) {
    case NewsLabel::NR: return "NR";
    case NewsLabel::FR: return "FR";
    case NewsLabel::TR: return "TR";
    case NewsLabel::UR: return "UR";
  }
  return "?";
}

std::optional<NewsLabel> parse_label(std::string_view text) {
  if (text == "NR") return NewsLabel::NR;
  if (text == "FR") return NewsLabel::FR;
  if (text == "TR") return NewsLabel::TR;
  if (text == "UR") return NewsLabel::UR;
  return std::nullopt;
}

IndexTable::IndexTable(std::vector<EntityId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  if (!ids_.empty() && ids_.front() == 0) throw IntegrityError("id 0 is reserved for PAD");
}

bool IndexTable::contains(EntityId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::size_t IndexTable::index_of(EntityId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) throw IndexError("unknown id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids_.begin()) + 1;
}

namespace {

void validate_item(const NewsItem& item, LabelScheme scheme, std::size_t vocab_size) {
  const auto where = "news " + std::to_string(item.news_id) + ": ";
  if (item.news_id == 0) throw IntegrityError("news_id 0 is reserved for PAD");
  if (item.publisher_id == 0) throw IntegrityError(where + "publisher_id 0 is reserved for PAD");
  if (item.publish_time < 0) throw IntegrityError(where + "negative publish_time");
  if (class_index(item.label) >= class_count(scheme)) {
    throw IntegrityError(where + "label " + std::string(label_name(item.label)) +
                         " not allowed in the " + std::string(scheme_name(scheme)) + " scheme");
  }
  for (const auto& r : item.reposts) {
    if (r.user_id == 0) throw IntegrityError(where + "user_id 0 is reserved for PAD");
    if (r.time < item.publish_time) {
      throw IntegrityError(where + "repost by user " + std::to_string(r.user_id) +
                           " precedes publish_time");
    }
  }
  if (vocab_size > 0) {
    for (auto t : item.tokens) {
      if (t >= vocab_size) {
        throw IntegrityError(where + "token " + std::to_string(t) + " outside vocabulary of " +
                             std::to_string(vocab_size));
      }
    }
  }
}

}  // namespace

Corpus::Corpus(std::vector<NewsItem> news, LabelScheme scheme, std::size_t vocab_size)
    : news_(std::move(news)), scheme_(scheme), vocab_size_(vocab_size) {
  std::vector<EntityId> publisher_ids;
  std::vector<EntityId> user_ids;
  std::size_t max_token = 0;
  for (std::size_t i = 0; i < news_.size(); ++i) {
    auto& item = news_[i];
    std::stable_sort(item.reposts.begin(), item.reposts.end(),
                     [](const Repost& a, const Repost& b) { return a.time < b.time; });
    validate_item(item, scheme_, vocab_size_);
    if (!news_pos_.emplace(item.news_id, i).second) {
      throw IntegrityError("duplicate news_id " + std::to_string(item.news_id));
    }
    publisher_ids.push_back(item.publisher_id);
    for (const auto& r : item.reposts) user_ids.push_back(r.user_id);
    for (auto t : item.tokens) max_token = std::max<std::size_t>(max_token, t);
  }
  if (vocab_size_ == 0) vocab_size_ = max_token + 1;
  publishers_ = IndexTable(std::move(publisher_ids));
  users_ = IndexTable(std::move(user_ids));
}

Corpus Corpus::with_tables_of(const Corpus& base, std::vector<NewsItem> news) {
  Corpus out;
  out.scheme_ = base.scheme_;
  out.vocab_size_ = base.vocab_size_;
  out.publishers_ = base.publishers_;
  out.users_ = base.users_;
  out.news_ = std::move(news);
  for (std::size_t i = 0; i < out.news_.size(); ++i) {
    auto& item = out.news_[i];
    std::stable_sort(item.reposts.begin(), item.reposts.end(),
                     [](const Repost& a, const Repost& b) { return a.time < b.time; });
    validate_item(item, out.scheme_, out.vocab_size_);
    if (!out.news_pos_.emplace(item.news_id, i).second) {
      throw IntegrityError("duplicate news_id " + std::to_string(item.news_id));
    }
    if (!out.publishers_.contains(item.publisher_id)) {
      throw IntegrityError("publisher " + std::to_string(item.publisher_id) + " not in index table");
    }
    for (const auto& r : item.reposts) {
      if (!out.users_.contains(r.user_id)) {
        throw IntegrityError("user " + std::to_string(r.user_id) + " not in index table");
      }
    }
  }
  return out;
}

std::size_t Corpus::news_index(EntityId news_id) const {
  auto it = news_pos_.find(news_id);
  if (it == news_pos_.end()) throw IndexError("unknown news_id " + std::to_string(news_id));
  return it->second + 1;
}

namespace {

template <typename N>
N parse_int(std::string_view text, std::size_t line, const char* field) {
  N value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(line, std::string("bad integer in ") + field + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) pos = text.size();
    auto piece = text.substr(start, pos - start);
    if (!piece.empty()) parts.push_back(piece);
    start = pos + 1;
  }
  return parts;
}

template <typename N>
N json_int(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(line, std::string("missing field ") + key);
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(line, std::string("field ") + key + " must be an integer");
  if (v.is_number_unsigned()) return static_cast<N>(v.get<std::uint64_t>());
  const auto s = v.get<std::int64_t>();
  if (s < 0 && std::is_unsigned_v<N>) {
    throw IntegrityError("line " + std::to_string(line) + ": field " + key + " must be positive");
  }
  return static_cast<N>(s);
}

std::string json_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(line, std::string("missing field ") + key);
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ParseError(line, std::string("field ") + key + " must be a string");
  return v.get<std::string>();
}

NewsItem parse_item(const nlohmann::json& obj, std::size_t line) {
  NewsItem item;
  item.news_id = json_int<EntityId>(obj, "news_id", line);
  item.publisher_id = json_int<EntityId>(obj, "publisher_id", line);
  item.publish_time = json_int<Seconds>(obj, "publish_time", line);
  const auto label = json_string(obj, "label", line);
  auto parsed = parse_label(label);
  if (!parsed) throw ParseError(line, "unknown label '" + label + "'");
  item.label = *parsed;

  const auto tokens = json_string(obj, "tokens", line);
  for (auto piece : split_on(tokens, ' ')) item.tokens.push_back(parse_int<TokenId>(piece, line, "tokens"));

  const auto reposts = json_string(obj, "reposts", line);
  for (auto pair : split_on(reposts, ',')) {
    const auto colon = pair.find(':');
    if (colon == std::string_view::npos) throw ParseError(line, "repost entry needs user:time");
    Repost r;
    r.user_id = parse_int<EntityId>(pair.substr(0, colon), line, "reposts");
    r.time = parse_int<Seconds>(pair.substr(colon + 1), line, "reposts");
    item.reposts.push_back(r);
  }

  const auto where = "line " + std::to_string(line) + ": ";
  if (item.news_id == 0 || item.publisher_id == 0) {
    throw IntegrityError(where + "id 0 is reserved for PAD");
  }
  for (const auto& r : item.reposts) {
    if (r.user_id == 0) throw IntegrityError(where + "user_id 0 is reserved for PAD");
    if (r.time < item.publish_time) throw IntegrityError(where + "repost time before publish_time");
  }
  return item;
}

}  // namespace

Corpus parse_corpus(std::istream& in) {
  std::vector<NewsItem> items;
  std::optional<LabelScheme> scheme;
  std::size_t vocab_size = 0;
  std::set<EntityId> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line, "record must be a JSON object");
    if (!obj.contains("news_id")) {
      if (!items.empty()) throw ParseError(line, "metadata line must precede records");
      if (obj.contains("label_scheme")) scheme = parse_scheme(json_string(obj, "label_scheme", line));
      if (obj.contains("vocab_size")) vocab_size = json_int<std::size_t>(obj, "vocab_size", line);
      continue;
    }
    auto item = parse_item(obj, line);
    if (!seen.insert(item.news_id).second) {
      throw IntegrityError("line " + std::to_string(line) + ": duplicate news_id " +
                           std::to_string(item.news_id));
    }
    items.push_back(std::move(item));
  }
  if (!scheme) {
    const bool four = std::any_of(items.begin(), items.end(), [](const NewsItem& n) {
      return n.label == NewsLabel::TR || n.label == NewsLabel::UR;
    });
    scheme = four ? LabelScheme::FourClass : LabelScheme::TwoClass;
  }
  return Corpus(std::move(items), *scheme, vocab_size);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

std::string format_record(const NewsItem& item) {
  std::string tokens;
  for (std::size_t i = 0; i < item.tokens.size(); ++i) {
    if (i) tokens += ' ';
    tokens += std::to_string(item.tokens[i]);
  }
  std::string reposts;
  for (std::size_t i = 0; i < item.reposts.size(); ++i) {
    if (i) reposts += ',';
    reposts += std::to_string(item.reposts[i].user_id) + ":" + std::to_string(item.reposts[i].time);
  }
  nlohmann::ordered_json obj;
  obj["news_id"] = item.news_id;
  obj["publisher_id"] = item.publisher_id;
  obj["label"] = std::string(label_name(item.label));
  obj["publish_time"] = item.publish_time;
  obj["tokens"] = tokens;
  obj["reposts"] = reposts;
  return obj.dump();
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  nlohmann::ordered_json meta;
  meta["label_scheme"] = std::string(scheme_name(corpus.label_scheme()));
  meta["vocab_size"] = corpus.vocab_size();
  out << meta.dump() << '\n';
  for (const auto& item : corpus.news()) out << format_record(item) << '\n';
}

namespace {

struct Apportionment {
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Per-class counts for validation and test such that every (class, part)
// count is the floor or ceiling of its proportional share and the part
// totals are exact. Candidates are enumerated; the smallest worst-case
// deviation wins, first found on ties.
Apportionment apportion(const std::vector<std::size_t>& class_sizes, std::size_t total,
                        std::size_t val_total, std::size_t test_total) {
  const std::size_t k = class_sizes.size();
  const std::size_t train_total = total - val_total - test_total;
  auto share = [&](std::size_t part, std::size_t c) {
    return static_cast<double>(part) * static_cast<double>(class_sizes[c]) / static_cast<double>(total);
  };

  Apportionment best;
  double best_dev = std::numeric_limits<double>::infinity();
  const std::size_t combos = std::size_t{1} << k;
  std::vector<std::size_t> val(k), test(k);
  for (std::size_t vm = 0; vm < combos; ++vm) {
    std::size_t vsum = 0;
    bool ok = true;
    for (std::size_t c = 0; c < k; ++c) {
      const double s = share(val_total, c);
      val[c] = static_cast<std::size_t>((vm >> c) & 1 ? std::ceil(s) : std::floor(s));
      ok = ok && val[c] <= class_sizes[c];
      vsum += val[c];
    }
    if (!ok || vsum != val_total) continue;
    for (std::size_t tm = 0; tm < combos; ++tm) {
      std::size_t tsum = 0;
      bool fits = true;
      double dev = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double s = share(test_total, c);
        test[c] = static_cast<std::size_t>((tm >> c) & 1 ? std::ceil(s) : std::floor(s));
        fits = fits && val[c] + test[c] <= class_sizes[c];
        tsum += test[c];
        if (!fits) break;
        const double train_c = static_cast<double>(class_sizes[c] - val[c] - test[c]);
        dev = std::max({dev, std::abs(val[c] - share(val_total, c)),
                        std::abs(test[c] - share(test_total, c)),
                        std::abs(train_c - share(train_total, c))});
      }
      if (!fits || tsum != test_total) continue;
      if (dev < best_dev) {
        best_dev = dev;
        best.validation = val;
        best.test = test;
      }
    }
  }
  if (best.validation.empty()) throw SizeError("split_corpus: no valid stratified apportionment");
  return best;
}

}  // namespace

Split split_corpus(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.news_count();
  if (n < 10) throw SizeError("split_corpus: need at least 10 news, got " + std::to_string(n));
  const std::size_t val_total = n / 10;
  const std::size_t test_total = (n - val_total) / 4;

  const std::size_t k = class_count(corpus.label_scheme());
  std::vector<std::vector<EntityId>> by_class(k);
  for (const auto& item : corpus.news()) by_class[class_index(item.label)].push_back(item.news_id);

  // Classes that never occur drop out of the apportionment.
  std::vector<std::size_t> present;
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].empty()) continue;
    present.push_back(c);
    sizes.push_back(by_class[c].size());
  }
  const auto plan = apportion(sizes, n, val_total, test_total);

  std::mt19937_64 rng(seed);
  Split split;
  for (std::size_t i = 0; i < present.size(); ++i) {
    auto ids = by_class[present[i]];
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto v = plan.validation[i];
    const auto t = plan.test[i];
    split.validation.insert(split.validation.end(), ids.begin(), ids.begin() + v);
    split.test.insert(split.test.end(), ids.begin() + v, ids.begin() + v + t);
    split.train.insert(split.train.end(), ids.begin() + v + t, ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Credibility credibility_from_history(const std::vector<NewsLabel>& history) {
  bool fake = false;
  bool genuine = false;
  for (auto l : history) {
    if (is_fake(l))
      fake = true;
    else
      genuine = true;
  }
  if (!fake) return Credibility::Reliable;
  if (!genuine) return Credibility::Unreliable;
  return Credibility::Uncertain;
}

CredibilityLabels annotate_credibility(const Corpus& corpus, const std::vector<EntityId>& train_ids) {
  std::map<EntityId, std::vector<NewsLabel>> publisher_history;
  std::map<EntityId, std::vector<NewsLabel>> user_history;
  for (auto id : train_ids) {
    const auto& item = corpus.item(id);
    publisher_history[item.publisher_id].push_back(item.label);
    for (const auto& r : item.reposts) user_history[r.user_id].push_back(item.label);
  }
  CredibilityLabels labels;
  for (const auto& [id, history] : publisher_history)
    labels.publishers.emplace(id, credibility_from_history(history));
  for (const auto& [id, history] : user_history)
    labels.users.emplace(id, credibility_from_history(history));
  return labels;
}

}  // namespace sman
