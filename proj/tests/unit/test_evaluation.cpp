#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sman/errors.hpp"
#include "sman/evaluation.hpp"

using namespace sman;
using namespace sman::testing;

namespace {

TrainConfig tiny_train() {
  TrainConfig c;
  c.model = tiny_model(MaskMode::Literal);
  c.epochs = 4;
  c.batch_size = 2;
  c.seed = 5;
  c.adam.learning_rate = 1e-2;
  return c;
}

struct Trained {
  Corpus corpus = tiny_corpus(LabelScheme::FourClass);
  Split split{{1, 2}, {4}, {3, 5}};
  CredibilityLabels labels = annotate_credibility(corpus, split.train);
  Checkpoint ckpt = train(corpus, split, labels, tiny_train());
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("metrics hand example") {
  const std::vector<std::size_t> preds{0, 0, 1, 1}, labels{0, 1, 1, 1};
  const auto r = compute_metrics(preds, labels, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(r.per_class[1].precision == 1.0);
  CHECK(r.per_class[1].recall == doctest::Approx(2.0 / 3));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8));
  CHECK(r.per_class[0].precision == 0.5);
  CHECK(r.per_class[0].recall == 1.0);
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3));
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 0}, {1, 2}});
}

TEST_CASE("perfect predictions and absent classes") {
  const std::vector<std::size_t> labels{0, 2, 2, 0};
  const auto r = compute_metrics(labels, labels, 4);
  CHECK(r.accuracy == 1.0);
  CHECK(r.per_class[0].f1 == 1.0);
  CHECK(r.per_class[2].f1 == 1.0);
  CHECK(r.per_class[1].absent);
  CHECK(r.per_class[1].f1 == 0.0);
  CHECK(r.per_class[3].absent);
  CHECK_FALSE(r.per_class[0].absent);
}

TEST_CASE("metrics reject bad input") {
  const std::vector<std::size_t> three{0, 1, 1}, two{0, 1};
  CHECK_THROWS_AS(compute_metrics(three, two, 2), ShapeError);
  CHECK_THROWS_AS(compute_metrics({}, {}, 2), ShapeError);
  CHECK_THROWS_AS(compute_metrics(two, std::vector<std::size_t>{0, 2}, 2), IndexError);
}

TEST_CASE("metrics match the counting oracle on random cases") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t classes = trial % 2 ? 4 : 2;
    const std::size_t n = 1 + rng() % 30;
    std::vector<std::size_t> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng() % classes;
      labels[i] = rng() % classes;
    }
    const auto got = compute_metrics(preds, labels, classes);
    const auto want = count_metrics(preds, labels, classes);
    CHECK(got.accuracy == want.accuracy);
    CHECK(got.confusion == want.confusion);
    std::size_t total = 0, trace = 0;
    for (std::size_t a = 0; a < classes; ++a) {
      CHECK(got.per_class[a].precision == want.precision[a]);
      CHECK(got.per_class[a].recall == want.recall[a]);
      CHECK(got.per_class[a].f1 == want.f1[a]);
      CHECK(got.per_class[a].support == want.support[a]);
      CHECK(got.per_class[a].predicted == want.predicted[a]);
      for (auto v : {got.per_class[a].precision, got.per_class[a].recall, got.per_class[a].f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      for (std::size_t p = 0; p < classes; ++p) total += got.confusion[a][p];
      trace += got.confusion[a][a];
    }
    CHECK(total == n);
    CHECK(got.accuracy == static_cast<double>(trace) / static_cast<double>(total));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> sp(n), sl(n);
    for (std::size_t i = 0; i < n; ++i) {
      sp[i] = preds[order[i]];
      sl[i] = labels[order[i]];
    }
    CHECK(compute_metrics(sp, sl, classes) == got);
  }
}

TEST_CASE("evaluate defaults to the test split and checks dimensions") {
  const Trained t;
  const auto report = evaluate(t.ckpt, t.corpus);
  CHECK(report.count == 2);
  CHECK(report == evaluate(t.ckpt, t.corpus, t.split.test));
  const auto predicted = predict_classes(t.ckpt, t.corpus, t.split.test);
  std::vector<std::size_t> labels;
  for (auto id : t.split.test) labels.push_back(class_index(t.corpus.item(id).label));
  auto counted = compute_metrics(predicted, labels, 4);
  CHECK(report.variant == "full");
  counted.variant = report.variant;
  CHECK(counted == report);

  const auto other = tiny_corpus(LabelScheme::TwoClass);
  CHECK_THROWS_AS(evaluate(t.ckpt, other), ConfigError);
}

TEST_CASE("early detection curve") {
  const Trained t;
  const std::vector<Seconds> unbounded{kUnboundedDelay};
  const auto at_inf = early_detection_curve(t.ckpt, t.corpus, unbounded);
  REQUIRE(at_inf.size() == 1);
  auto plain = evaluate(t.ckpt, t.corpus);
  CHECK(at_inf[0].confusion == plain.confusion);
  CHECK(at_inf[0].accuracy == plain.accuracy);
  CHECK(at_inf[0].delay == kUnboundedDelay);

  const auto grid = default_delays();
  CHECK(grid == std::vector<Seconds>{0, 3600, 7200, 14400, 28800, 43200, 86400, kUnboundedDelay});
  const auto serial = early_detection_curve(t.ckpt, t.corpus, grid, 1);
  const auto threaded = early_detection_curve(t.ckpt, t.corpus, grid, 3);
  CHECK(serial == threaded);
  CHECK(serial.front().delay == 0);

  // A delay past the last repost sees the whole diffusion graph.
  const std::vector<Seconds> covering{0, 20000};
  CHECK(early_detection_curve(t.ckpt, t.corpus, covering).back().confusion == plain.confusion);

  const std::vector<Seconds> unsorted{3600, 0};
  CHECK_THROWS_AS(early_detection_curve(t.ckpt, t.corpus, unsorted), ConfigError);
}

TEST_CASE("ablation of the full variant equals a plain run") {
  const Trained t;
  const std::vector<Variant> full{Variant::Full};
  const auto runs = run_ablation(t.corpus, t.split, t.labels, tiny_train(), full);
  REQUIRE(runs.size() == 1);
  auto plain = evaluate(t.ckpt, t.corpus);
  plain.variant = "full";
  CHECK(runs[0].report == plain);
  CHECK(runs[0].checkpoint.history == t.ckpt.history);

  const std::vector<Variant> all{Variant::Full, Variant::NoPc, Variant::NoUc, Variant::NoPuc};
  const auto serial = run_ablation(t.corpus, t.split, t.labels, tiny_train(), all, 1);
  const auto threaded = run_ablation(t.corpus, t.split, t.labels, tiny_train(), all, 2);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(serial[i].variant == all[i]);
    CHECK(serial[i].report.variant == variant_name(all[i]));
    CHECK(serial[i].report == threaded[i].report);
  }
}

TEST_CASE("report CSV and summary") {
  auto a = compute_metrics(std::vector<std::size_t>{0, 1, 1}, std::vector<std::size_t>{0, 1, 0}, 2);
  a.variant = "full";
  auto b = a;
  b.delay = 3600;
  auto c = a;
  c.delay = kUnboundedDelay;
  const std::vector<EvalReport> reports{a, b, c};
  std::ostringstream csv;
  write_report_csv(csv, reports, LabelScheme::TwoClass);
  const auto lines = lines_of(csv.str());
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "variant,delay,class,precision,recall,f1,support,accuracy");
  CHECK(lines[1] == "full,,NR,1.000000,0.500000,0.666667,2,0.666667");
  CHECK(lines[4] == "full,3600,FR,0.500000,1.000000,0.666667,1,0.666667");
  CHECK(lines[5].starts_with("full,inf,NR,"));

  std::ostringstream summary;
  write_report_summary(summary, reports, LabelScheme::TwoClass);
  const auto doc = nlohmann::json::parse(summary.str());
  CHECK(doc.dump().find("0.6666") != std::string::npos);

  CHECK(format_delay(std::nullopt).empty());
  CHECK(format_delay(kUnboundedDelay) == "inf");
  CHECK(format_delay(7200) == "7200");
}

TEST_CASE("median, thread budget and parallel_for") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);

  unsetenv("SMAN_THREADS");
  CHECK(thread_budget() == 1);
  setenv("SMAN_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  setenv("SMAN_THREADS", "0", 1);
  CHECK_THROWS_AS(thread_budget(), ConfigError);
  unsetenv("SMAN_THREADS");

  std::vector<int> seen(10, 0);
  parallel_for(10, 4, [&](std::size_t i) { seen[i] += 1; });
  CHECK(seen == std::vector<int>(10, 1));
  CHECK_THROWS_AS(parallel_for(5, 2, [](std::size_t i) {
                    if (i == 3) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
