#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sman/corpus.hpp"
#include "sman/training.hpp"

namespace sman {

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;    // actual count
  std::size_t predicted = 0;  // predicted count
  // Neither predicted nor present; all three scores are reported as 0.
  bool absent = false;
  bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
  std::size_t count = 0;
  double accuracy = 0;
  std::vector<ClassMetrics> per_class;
  // confusion[actual][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::string variant;
  std::optional<Seconds> delay;
  bool operator==(const EvalReport&) const = default;
};

// Scores undefined by a zero denominator are 0.
EvalReport compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                           std::size_t classes);

// Predicted class per news id, using the checkpoint's parameters on `corpus`.
std::vector<std::size_t> predict_classes(const Checkpoint& checkpoint, const Corpus& corpus,
                                         const std::vector<EntityId>& ids);

// Metrics on `ids` (the checkpoint's test split when empty).
EvalReport evaluate(const Checkpoint& checkpoint, const Corpus& corpus, const std::vector<EntityId>& ids = {});

// Default delay grid in seconds: 0, 1h, 2h, 4h, 8h, 12h, 24h, unbounded.
std::vector<Seconds> default_delays();

// One report per delay over the checkpoint's test split. Only reposts inside
// the delay are visible; text and the publishing graph are unchanged. The model
// is not retrained.
std::vector<EvalReport> early_detection_curve(const Checkpoint& checkpoint, const Corpus& corpus,
                                              std::span<const Seconds> delays, std::size_t threads = 1);

struct AblationRun {
  Variant variant = Variant::Full;
  EvalReport report;
  Checkpoint checkpoint;
};

// Trains each variant from the same seed, data and split; evaluates on test.
std::vector<AblationRun> run_ablation(const Corpus& corpus, const Split& split, const CredibilityLabels& labels,
                                      const TrainConfig& base, std::span<const Variant> variants,
                                      std::size_t threads = 1);

// SMAN_THREADS, or 1 when unset.
std::size_t thread_budget();

// Runs fn(0..count-1) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::string format_delay(const std::optional<Seconds>& delay);

// Columns: variant,delay,class,precision,recall,f1,support,accuracy; one row
// per class of each report.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, LabelScheme scheme);
// JSON document with one entry per report.
void write_report_summary(std::ostream& out, std::span<const EvalReport> reports, LabelScheme scheme);

double median(std::vector<double> values);

}  // namespace sman
