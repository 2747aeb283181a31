#include "sman/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sman/errors.hpp"

namespace sman {

EvalReport compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                           std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ShapeError("compute_metrics: nothing to evaluate");
  if (classes == 0) throw ShapeError("compute_metrics: no classes");

  EvalReport r;
  r.count = labels.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes || predictions[i] >= classes) {
      throw IndexError("compute_metrics: class index out of range at position " + std::to_string(i));
    }
    ++r.confusion[labels[i]][predictions[i]];
  }
  std::size_t hits = 0;
  for (std::size_t c = 0; c < classes; ++c) hits += r.confusion[c][c];
  r.accuracy = static_cast<double>(hits) / static_cast<double>(r.count);

  for (std::size_t c = 0; c < classes; ++c) {
    ClassMetrics m;
    for (std::size_t k = 0; k < classes; ++k) {
      m.support += r.confusion[c][k];
      m.predicted += r.confusion[k][c];
    }
    const auto tp = static_cast<double>(r.confusion[c][c]);
    m.absent = m.support == 0 && m.predicted == 0;
    m.precision = m.predicted ? tp / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.per_class.push_back(m);
  }
  return r;
}

namespace {

void require_matching(const Checkpoint& checkpoint, const Corpus& corpus) {
  if (dims_of(corpus) != checkpoint.dims) {
    throw ConfigError("corpus does not match the checkpoint's entity counts, vocabulary or label scheme");
  }
}

std::vector<std::size_t> predict_on(const Checkpoint& checkpoint, const Corpus& corpus, const GraphInputs& inputs,
                                    const std::vector<EntityId>& ids) {
  std::vector<std::size_t> news;
  news.reserve(ids.size());
  for (auto id : ids) news.push_back(corpus.news_index(id));
  return argmax_rows(predict_proba(checkpoint.params, checkpoint.config.model, inputs, news));
}

std::vector<std::size_t> labels_of(const Corpus& corpus, const std::vector<EntityId>& ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(class_index(corpus.item(id).label));
  return out;
}

}  // namespace

std::vector<std::size_t> predict_classes(const Checkpoint& checkpoint, const Corpus& corpus,
                                         const std::vector<EntityId>& ids) {
  require_matching(checkpoint, corpus);
  return predict_on(checkpoint, corpus, build_graph_inputs(corpus, checkpoint.config.model), ids);
}

EvalReport evaluate(const Checkpoint& checkpoint, const Corpus& corpus, const std::vector<EntityId>& ids) {
  const auto& targets = ids.empty() ? checkpoint.split.test : ids;
  auto report = compute_metrics(predict_classes(checkpoint, corpus, targets), labels_of(corpus, targets),
                                checkpoint.dims.classes);
  report.variant = std::string(variant_name(checkpoint.config.variant));
  return report;
}

std::vector<Seconds> default_delays() {
  constexpr Seconds hour = 3600;
  return {0, hour, 2 * hour, 4 * hour, 8 * hour, 12 * hour, 24 * hour, kUnboundedDelay};
}

std::vector<EvalReport> early_detection_curve(const Checkpoint& checkpoint, const Corpus& corpus,
                                              std::span<const Seconds> delays, std::size_t threads) {
  require_matching(checkpoint, corpus);
  if (!std::is_sorted(delays.begin(), delays.end())) throw ConfigError("delays must be sorted ascending");
  const auto& ids = checkpoint.split.test;
  const auto labels = labels_of(corpus, ids);
  std::vector<EvalReport> reports(delays.size());
  parallel_for(delays.size(), threads, [&](std::size_t i) {
    const auto truncated = truncate_by_delay(corpus, delays[i]);
    const auto inputs = build_graph_inputs(truncated, checkpoint.config.model);
    auto report = compute_metrics(predict_on(checkpoint, truncated, inputs, ids), labels, checkpoint.dims.classes);
    report.variant = std::string(variant_name(checkpoint.config.variant));
    report.delay = delays[i];
    reports[i] = std::move(report);
  });
  return reports;
}

std::vector<AblationRun> run_ablation(const Corpus& corpus, const Split& split, const CredibilityLabels& labels,
                                      const TrainConfig& base, std::span<const Variant> variants,
                                      std::size_t threads) {
  std::vector<AblationRun> runs(variants.size());
  parallel_for(variants.size(), threads, [&](std::size_t i) {
    auto config = base;
    config.variant = variants[i];
    runs[i].variant = variants[i];
    runs[i].checkpoint = train(corpus, split, labels, config);
    runs[i].report = evaluate(runs[i].checkpoint, corpus);
  });
  return runs;
}

std::size_t thread_budget() {
  const char* raw = std::getenv("SMAN_THREADS");
  if (!raw || !*raw) return 1;
  KeyValueConfig cfg;
  cfg.set("SMAN_THREADS", raw);
  const auto n = cfg.get_uint("SMAN_THREADS", 1);
  if (n == 0) throw ConfigError("SMAN_THREADS must be at least 1");
  return n;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (auto i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_delay(const std::optional<Seconds>& delay) {
  if (!delay) return "";
  if (*delay == kUnboundedDelay) return "inf";
  return std::to_string(*delay);
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, LabelScheme scheme) {
  out << "variant,delay,class,precision,recall,f1,support,accuracy\n";
  for (const auto& r : reports) {
    if (r.per_class.size() != class_count(scheme)) throw ShapeError("report class count does not match the scheme");
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& m = r.per_class[c];
      out << r.variant << ',' << format_delay(r.delay) << ',' << label_name(static_cast<NewsLabel>(c)) << ','
          << format_number(m.precision) << ',' << format_number(m.recall) << ',' << format_number(m.f1) << ','
          << m.support << ',' << format_number(r.accuracy) << '\n';
    }
  }
}

void write_report_summary(std::ostream& out, std::span<const EvalReport> reports, LabelScheme scheme) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["label_scheme"] = scheme_name(scheme);
  json list = json::array();
  for (const auto& r : reports) {
    json entry;
    entry["variant"] = r.variant;
    if (r.delay) entry["delay"] = format_delay(r.delay);
    entry["count"] = r.count;
    entry["accuracy"] = r.accuracy;
    json classes = json::object();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& m = r.per_class[c];
      classes[std::string(label_name(static_cast<NewsLabel>(c)))] = {
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"support", m.support},     {"predicted", m.predicted}, {"absent", m.absent}};
    }
    entry["classes"] = classes;
    entry["confusion"] = r.confusion;
    list.push_back(entry);
  }
  doc["reports"] = list;
  out << doc.dump(2) << '\n';
}

double median(std::vector<double> values) {
  if (values.empty()) throw ShapeError("median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace sman
