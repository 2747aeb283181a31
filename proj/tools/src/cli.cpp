#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sman/corpus.hpp"
#include "sman/errors.hpp"
#include "sman/evaluation.hpp"
#include "sman/synthetic.hpp"
#include "sman/training.hpp"
#include "sman/version.hpp"

namespace sman::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kManifestName = "run_manifest.json";

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_input(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw MissingInput(std::string(what) + " not found: " + path);
}

// Config file (if any), then --set pairs, then explicit flags.
KeyValueConfig resolve_config(const std::string& path, const std::vector<std::string>& sets,
                              const std::map<std::string, std::string>& flags) {
  KeyValueConfig cfg;
  if (!path.empty()) {
    require_input(path, "config file");
    cfg = KeyValueConfig::load(path);
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : flags) cfg.set(k, v);
  return cfg;
}

json config_json(const KeyValueConfig& cfg) {
  json out = json::object();
  for (const auto& [k, v] : cfg.values()) out[k] = v;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// One manifest per output directory; each output file (or "." for a whole
// directory) owns an entry.
void record_run(const fs::path& output, bool directory, json run) {
  const auto dir = directory ? output : (output.has_parent_path() ? output.parent_path() : fs::path("."));
  const std::string key = directory ? "." : output.filename().string();
  const auto path = dir / kManifestName;
  json doc;
  if (fs::exists(path)) {
    std::ifstream in(path);
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("runs")) doc = json();
  }
  if (doc.is_null()) doc = {{"runs", json::object()}};
  doc["runs"][key] = std::move(run);
  write_text(path, doc.dump(2) + "\n");
}

json run_record(const std::string& command, const KeyValueConfig& cfg, std::optional<std::uint64_t> seed,
                json inputs, json outputs, Clock::time_point start) {
  json run;
  run["command"] = command;
  run["artifact_version"] = kVersion;
  run["config"] = config_json(cfg);
  if (seed) run["seed"] = *seed;
  run["inputs"] = std::move(inputs);
  run["outputs"] = std::move(outputs);
  run["timings"] = {{"wall_seconds", std::chrono::duration<double>(Clock::now() - start).count()}};
  return run;
}

fs::path summary_path_for(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".summary.json");
  return p;
}

Corpus load_data(const std::string& path) {
  require_input(path, "corpus");
  return load_corpus(path);
}

Checkpoint load_ckpt(const std::string& dir) {
  require_input(dir, "checkpoint");
  return load_checkpoint(dir);
}

std::string data_for(const Checkpoint& ckpt, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (ckpt.data_path.empty()) throw ConfigError("checkpoint records no corpus path; pass --data");
  return ckpt.data_path;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Seconds> parse_delays(const std::string& text) {
  if (text == "default") return default_delays();
  std::vector<Seconds> out;
  for (const auto& item : split_list(text)) {
    if (item == "inf") {
      out.push_back(kUnboundedDelay);
      continue;
    }
    KeyValueConfig one;
    one.set("delay", item);
    const auto v = one.get_int("delay", 0);
    if (v < 0) throw ConfigError("delays must be non-negative");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("no delays given");
  return out;
}

std::string csv_text(std::span<const EvalReport> reports, LabelScheme scheme) {
  std::ostringstream os;
  write_report_csv(os, reports, scheme);
  return os.str();
}

std::string summary_text(std::span<const EvalReport> reports, LabelScheme scheme) {
  std::ostringstream os;
  write_report_summary(os, reports, scheme);
  return os.str();
}

struct GenerateArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  const auto cfg = resolve_config(a.config, a.sets, {});
  const auto gen = SyntheticConfig::from_config(cfg);
  const auto corpus = generate_synthetic(gen, a.seed);
  std::ostringstream os;
  write_corpus(corpus, os);
  write_text(a.out, os.str());
  record_run(a.out, false,
             run_record("generate", gen.to_config(), a.seed, {{"config", a.config}}, json::array({a.out}), start));
  out << "wrote " << corpus.news_count() << " news to " << a.out << '\n';
  return kOk;
}

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint64_t> seed, split_seed, epochs;
  std::string variant, mask_mode;
  std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  std::map<std::string, std::string> flags;
  if (a.seed) flags["seed"] = std::to_string(*a.seed);
  if (a.epochs) flags["epochs"] = std::to_string(*a.epochs);
  if (!a.variant.empty()) flags["variant"] = a.variant;
  if (!a.mask_mode.empty()) flags["mask_mode"] = a.mask_mode;
  const auto cfg = TrainConfig::from_config(resolve_config(a.config, a.sets, flags));
  const auto corpus = load_data(a.data);
  const auto split_seed = a.split_seed.value_or(cfg.seed);
  const auto split = split_corpus(corpus, split_seed);
  const auto labels = annotate_credibility(corpus, split.train);
  auto ckpt = train(corpus, split, labels, cfg, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << r.train_loss << " val_acc " << r.validation_accuracy << '\n';
  });
  ckpt.data_path = a.data;
  save_checkpoint(ckpt, a.out);
  auto resolved = cfg.to_config();
  resolved.set("split_seed", std::to_string(split_seed));
  record_run(a.out, true,
             run_record("train", resolved, cfg.seed, {{"data", a.data}, {"config", a.config}},
                        json::array({(fs::path(a.out) / "checkpoint.json").string(),
                                     (fs::path(a.out) / "params.bin").string()}),
                        start));
  out << "kept epoch " << ckpt.epoch << " (val_acc " << ckpt.validation_accuracy << ") in " << a.out << '\n';
  return kOk;
}

struct EvalArgs {
  std::string ckpt, data, out, summary;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  const auto ckpt = load_ckpt(a.ckpt);
  const auto data = data_for(ckpt, a.data);
  const auto corpus = load_data(data);
  const auto report = evaluate(ckpt, corpus);
  const fs::path csv = a.out.empty() ? fs::path(a.ckpt) / "eval.csv" : fs::path(a.out);
  const fs::path summary = a.summary.empty() ? summary_path_for(csv) : fs::path(a.summary);
  const std::vector<EvalReport> reports{report};
  write_text(csv, csv_text(reports, corpus.label_scheme()));
  write_text(summary, summary_text(reports, corpus.label_scheme()));
  record_run(csv, false,
             run_record("eval", ckpt.config.to_config(), ckpt.config.seed, {{"checkpoint", a.ckpt}, {"data", data}},
                        json::array({csv.string(), summary.string()}), start));
  out << "accuracy " << report.accuracy << " on " << report.count << " test news; wrote " << csv.string() << '\n';
  return kOk;
}

struct EarlyArgs {
  std::string ckpt, data, out, summary, delays = "default";
};

int cmd_early(const EarlyArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  const auto ckpt = load_ckpt(a.ckpt);
  const auto data = data_for(ckpt, a.data);
  const auto corpus = load_data(data);
  const auto delays = parse_delays(a.delays);
  const auto reports = early_detection_curve(ckpt, corpus, delays, thread_budget());
  const fs::path csv = a.out.empty() ? fs::path(a.ckpt) / "early.csv" : fs::path(a.out);
  const fs::path summary = a.summary.empty() ? summary_path_for(csv) : fs::path(a.summary);
  write_text(csv, csv_text(reports, corpus.label_scheme()));
  write_text(summary, summary_text(reports, corpus.label_scheme()));
  auto resolved = ckpt.config.to_config();
  resolved.set("delays", a.delays);
  record_run(csv, false,
             run_record("early", resolved, ckpt.config.seed, {{"checkpoint", a.ckpt}, {"data", data}},
                        json::array({csv.string(), summary.string()}), start));
  for (const auto& r : reports) out << "delay " << format_delay(r.delay) << " accuracy " << r.accuracy << '\n';
  return kOk;
}

struct AblateArgs {
  std::string data, config, out;
  std::string variants = "full,no-pc,no-uc,no-puc";
  std::string seeds = "1,2,3,4,5";
  std::optional<std::uint64_t> epochs;
  std::vector<std::string> sets;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  std::map<std::string, std::string> flags;
  if (a.epochs) flags["epochs"] = std::to_string(*a.epochs);
  const auto base = TrainConfig::from_config(resolve_config(a.config, a.sets, flags));
  const auto corpus = load_data(a.data);
  std::vector<Variant> variants;
  for (const auto& v : split_list(a.variants)) variants.push_back(parse_variant(v));
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(a.seeds)) {
    KeyValueConfig one;
    one.set("seed", s);
    seeds.push_back(one.get_uint("seed", 0));
  }
  if (variants.empty() || seeds.empty()) throw ConfigError("ablate needs at least one variant and one seed");

  // Every (seed, variant) pair is an independent training run.
  std::vector<EvalReport> reports(seeds.size() * variants.size());
  parallel_for(reports.size(), thread_budget(), [&](std::size_t i) {
    const auto seed = seeds[i / variants.size()];
    auto config = base;
    config.seed = seed;
    config.variant = variants[i % variants.size()];
    const auto split = split_corpus(corpus, seed);
    const auto labels = annotate_credibility(corpus, split.train);
    reports[i] = evaluate(train(corpus, split, labels, config), corpus);
  });

  const fs::path dir = a.out;
  std::ostringstream csv;
  csv << "seed,variant,delay,class,precision,recall,f1,support,accuracy\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::stringstream rows;
    write_report_csv(rows, std::span<const EvalReport>(&reports[i], 1), corpus.label_scheme());
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) csv << seeds[i / variants.size()] << ',' << line << '\n';
  }

  json summary;
  summary["label_scheme"] = scheme_name(corpus.label_scheme());
  summary["seeds"] = seeds;
  json per_variant = json::object();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < seeds.size(); ++s) acc.push_back(reports[s * variants.size() + v].accuracy);
    per_variant[std::string(variant_name(variants[v]))] = {{"accuracies", acc}, {"median_accuracy", median(acc)}};
    out << variant_name(variants[v]) << " median accuracy " << median(acc) << '\n';
  }
  summary["variants"] = per_variant;

  write_text(dir / "ablation.csv", csv.str());
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  auto resolved = base.to_config();
  resolved.set("variants", a.variants);
  resolved.set("seeds", a.seeds);
  record_run(dir, true,
             run_record("ablate", resolved, std::nullopt, {{"data", a.data}, {"config", a.config}},
                        json::array({(dir / "ablation.csv").string(), (dir / "summary.json").string()}), start));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-aware multi-head attention for fake news detection", "sman"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic corpus with a planted credibility signal");
  g->add_option("--config", gen.config, "Generator config file (key=value)");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Output corpus (JSONL)")->required();
  g->add_option("--set", gen.sets, "Override a config key (key=value)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  t->add_option("--data", tr.data, "Corpus (JSONL)")->required();
  t->add_option("--config", tr.config, "Training config file (key=value)");
  t->add_option("--out", tr.out, "Checkpoint directory")->required();
  t->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  t->add_option("--split-seed", tr.split_seed, "Data split seed (defaults to --seed)");
  t->add_option("--epochs", tr.epochs, "Number of epochs");
  t->add_option("--variant", tr.variant, "full | no-pc | no-uc | no-puc");
  t->add_option("--mask-mode", tr.mask_mode, "literal | hard");
  t->add_option("--set", tr.sets, "Override a config key (key=value)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
  e->add_option("--data", ev.data, "Corpus (defaults to the one used for training)");
  e->add_option("--out", ev.out, "Report CSV (defaults to <ckpt>/eval.csv)");
  e->add_option("--summary", ev.summary, "Summary JSON (defaults next to the CSV)");

  EarlyArgs ea;
  auto* y = app.add_subcommand("early", "Early-detection curve over repost delays");
  y->add_option("--ckpt", ea.ckpt, "Checkpoint directory")->required();
  y->add_option("--data", ea.data, "Corpus (defaults to the one used for training)");
  y->add_option("--delays", ea.delays, "Comma-separated seconds, 'inf', or 'default'");
  y->add_option("--out", ea.out, "Curve CSV (defaults to <ckpt>/early.csv)");
  y->add_option("--summary", ea.summary, "Summary JSON (defaults next to the CSV)");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Train and evaluate ablation variants over several seeds");
  b->add_option("--data", ab.data, "Corpus (JSONL)")->required();
  b->add_option("--config", ab.config, "Training config file (key=value)");
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--variants", ab.variants, "Comma-separated variants");
  b->add_option("--seeds", ab.seeds, "Comma-separated seeds");
  b->add_option("--epochs", ab.epochs, "Number of epochs");
  b->add_option("--set", ab.sets, "Override a config key (key=value)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << (ex.get_name() == "CallForVersion" ? std::string(kVersion) + "\n" : app.help());
      return kOk;
    }
    err << "error: " << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_eval(ev, out);
    if (*y) return cmd_early(ea, out);
    if (*b) return cmd_ablate(ab, out);
  } catch (const MissingInput& ex) {
    err << "error: " << ex.what() << '\n';
    return kMissingInput;
  } catch (const DataError& ex) {
    err << "error: " << ex.what() << '\n';
    return kBadData;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace sman::cli
