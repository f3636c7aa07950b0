#include "optiprobe/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "optiprobe/baselines.hpp"

namespace optiprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::Manual, "manual"},
    {Method::TriggerFile, "trigger-file"},
    {Method::DenseRandom, "dense-random"},
    {Method::DenseManual, "dense-manual"},
    {Method::AutoPromptLite, "autoprompt-lite"},
    {Method::Finetune, "finetune"},
    {Method::ClassPrior, "class-prior"},
    {Method::NaiveBayes, "naive-bayes"},
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string trace_csv(const TrainTrace& trace) {
  std::string out = "epoch,train_nll,dev_acc\n";
  out += "0," + format_double(trace.initial_train_nll) + ",\n";
  for (const auto& e : trace.epochs)
    out += std::to_string(e.epoch) + "," + format_double(e.train_nll) + "," + format_double(e.dev_accuracy) + "\n";
  return out;
}

}  // namespace

const char* to_string(Method method) {
  for (const auto& [m, name] : kMethodNames)
    if (m == method) return name;
  return "?";
}

Method parse_method(std::string_view text) {
  for (const auto& [m, name] : kMethodNames)
    if (text == name) return m;
  throw ManifestError("unknown method '" + std::string(text) + "'");
}

bool is_baseline(Method method) { return method == Method::ClassPrior || method == Method::NaiveBayes; }

bool is_trained(Method method) {
  return method == Method::DenseRandom || method == Method::DenseManual || method == Method::AutoPromptLite ||
         method == Method::Finetune;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  ExperimentManifest m;
  m.text = text;
  m.base_dir = base_dir;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ManifestError("manifest must be a JSON object");
  static const std::set<std::string> known{"data_dir",  "relations",      "vocabulary",  "relation_metadata",
                                           "prompts",   "train_file",     "dev_file",    "test_file",
                                           "dev_fraction", "allow_overlap", "model",     "regime",
                                           "method",    "method_options", "train",       "output_dir",
                                           "seed",      "jobs",           "description"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw ManifestError("unknown manifest field '" + key + "'");
  try {
    m.corpus.data_dir = resolve(base_dir, doc.at("data_dir").get<std::string>());
    m.corpus.relations = doc.value("relations", std::vector<std::string>{});
    m.corpus.train_file = doc.value("train_file", m.corpus.train_file);
    m.corpus.dev_file = doc.value("dev_file", m.corpus.dev_file);
    m.corpus.test_file = doc.value("test_file", m.corpus.test_file);
    m.corpus.dev_fraction = doc.value("dev_fraction", m.corpus.dev_fraction);
    m.corpus.allow_overlap = doc.value("allow_overlap", false);
    m.vocabulary = resolve(base_dir, doc.at("vocabulary").get<std::string>());
    if (doc.contains("relation_metadata"))
      m.relation_metadata = resolve(base_dir, doc["relation_metadata"].get<std::string>());
    if (doc.contains("prompts")) m.prompts = resolve(base_dir, doc["prompts"].get<std::string>());
    m.model = doc.value("model", json::object());
    m.method = parse_method(doc.at("method").get<std::string>());
    m.regime = doc.value("regime", json{{"kind", "random-model"}});
    const auto options = doc.value("method_options", json::object());
    m.m = options.value("m", m.m);
    m.candidates_per_step = options.value("candidates_per_step", m.candidates_per_step);
    m.restrict_to_seen_objects = options.value("restrict_to_seen_objects", false);
    m.banned_tokens = options.value("banned_tokens", std::vector<std::string>{});
    m.train = doc.value("train", json::object());
    m.output_dir = resolve(base_dir, doc.value("output_dir", std::string("run")));
    m.seed = doc.value("seed", std::uint64_t{0});
    m.jobs = doc.value("jobs", 1);
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  m.corpus.seed = m.seed;
  if (m.jobs < 1) throw ManifestError("manifest: jobs must be >= 1");
  if (m.m < 1) throw ManifestError("manifest: method_options.m must be >= 1");
  if (m.candidates_per_step < 1) throw ManifestError("manifest: candidates_per_step must be >= 1");
  if (m.method == Method::TriggerFile && !m.prompts) throw ManifestError("method trigger-file needs a prompts file");
  m.init_regime();
  m.train_config().validate();
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

InitRegime ExperimentManifest::init_regime() const {
  json doc = regime;
  auto fill = [&](json& r) {
    if (!r.is_object()) throw ManifestError("manifest: regime must be an object");
    if (r.value("kind", "") == "checkpoint" && r.contains("path"))
      r["path"] = resolve(base_dir, r["path"].get<std::string>()).string();
    if (!r.contains("seed") && r.value("kind", "") != "checkpoint") r["seed"] = seed;
  };
  fill(doc);
  if (doc.contains("base")) fill(doc["base"]);
  try {
    return init_regime_from_json(doc);
  } catch (const ParseError& e) {
    throw ManifestError(e.what());
  }
}

TrainConfig ExperimentManifest::train_config() const {
  auto defaults = method == Method::Finetune ? TrainConfig::finetune_defaults() : TrainConfig::optiprompt_defaults();
  defaults.seed = seed;
  try {
    return train_config_from_json(train, defaults);
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest train section: ") + e.what());
  }
}

std::vector<fs::path> ExperimentManifest::input_paths() const {
  std::vector<fs::path> paths{corpus.data_dir, vocabulary};
  if (relation_metadata) paths.push_back(*relation_metadata);
  if (prompts) paths.push_back(*prompts);
  auto r = init_regime();
  auto add_checkpoint = [&](const FromCheckpoint& c) {
    paths.push_back(fs::path(c.path.string() + ".json"));
    paths.push_back(fs::path(c.path.string() + ".bin"));
  };
  if (auto* c = std::get_if<FromCheckpoint>(&r)) add_checkpoint(*c);
  if (auto* re = std::get_if<RandomEmbeddings>(&r))
    if (auto* c = std::get_if<FromCheckpoint>(&re->base)) add_checkpoint(*c);
  return paths;
}

void apply(ExperimentManifest& manifest, const Overrides& overrides) {
  if (overrides.seed) {
    manifest.seed = *overrides.seed;
    manifest.corpus.seed = *overrides.seed;
  }
  if (overrides.jobs) {
    if (*overrides.jobs < 1) throw ArgumentError("--jobs must be >= 1");
    manifest.jobs = *overrides.jobs;
  }
  if (overrides.out) manifest.output_dir = *overrides.out;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& relation) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : relation) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Corpus load_manifest_corpus(const ExperimentManifest& manifest, CorpusLoadSummary* summary) {
  for (const auto& p : manifest.input_paths())
    if (!fs::exists(p)) throw IoError("input path does not exist: " + p.string());
  auto vocabulary = Vocabulary::load(manifest.vocabulary);
  std::map<std::string, RelationInfo> info;
  if (manifest.relation_metadata) info = load_relation_metadata(*manifest.relation_metadata);
  return load_corpus(manifest.corpus, std::move(vocabulary), std::move(info), summary);
}

CorpusLoadSummary ingest(const ExperimentManifest& manifest, const fs::path& out) {
  CorpusLoadSummary summary;
  auto corpus = load_manifest_corpus(manifest, &summary);
  fs::create_directories(out);
  corpus.vocabulary.save(out / "vocabulary.txt");
  std::string tsv = "relation\ttrain\tdev\ttest\tskipped_multi_token\tskipped_subject\tdev_from_split\n";
  for (const auto& e : summary.entries) {
    const auto& d = corpus.at(e.relation);
    fs::create_directories(out / e.relation);
    write_jsonl(out / e.relation / "train.jsonl", d.train());
    write_jsonl(out / e.relation / "dev.jsonl", d.dev());
    write_jsonl(out / e.relation / "test.jsonl", d.test());
    tsv += e.relation + "\t" + std::to_string(e.train) + "\t" + std::to_string(e.dev) + "\t" +
           std::to_string(e.test) + "\t" + std::to_string(e.skipped_multi_token) + "\t" +
           std::to_string(e.skipped_subject) + "\t" + (e.dev_from_split ? "yes" : "no") + "\n";
  }
  write_text(out / "summary.tsv", tsv);
  return summary;
}

namespace {

struct RelationOutcome {
  std::optional<Prompt> prompt;
  std::optional<Model> model;
  std::optional<TrainTrace> trace;
  std::vector<PredictionRecord> records;
};

Model build_model(const ExperimentManifest& manifest, const Vocabulary& vocabulary) {
  auto regime = manifest.init_regime();
  const FromCheckpoint* checkpoint = std::get_if<FromCheckpoint>(&regime);
  if (auto* re = std::get_if<RandomEmbeddings>(&regime)) checkpoint = std::get_if<FromCheckpoint>(&re->base);
  ModelConfig config;
  if (checkpoint) {
    config = load_checkpoint<double>(checkpoint->path).config;
  } else {
    json doc = manifest.model;
    doc["vocab_size"] = static_cast<int>(vocabulary.size());
    doc["mask_id"] = vocabulary.mask_id();
    config = model_config_from_json(doc);
  }
  config.seed = manifest.seed;
  if (config.vocab_size != static_cast<int>(vocabulary.size()) || config.mask_id != vocabulary.mask_id())
    throw CheckpointError("model vocabulary (size " + std::to_string(config.vocab_size) + ", mask " +
                          std::to_string(config.mask_id) + ") does not match the corpus vocabulary");
  return init_model<double>(config, regime);
}

class PromptSource {
 public:
  PromptSource(const ExperimentManifest& manifest, const Corpus& corpus) : corpus_(corpus) {
    if (manifest.prompts)
      for (auto& p : load_prompts(*manifest.prompts, corpus.vocabulary)) {
        auto relation = relation_of(p);
        if (!prompts_.emplace(relation, std::move(p)).second)
          throw ManifestError("prompts file has two prompts for relation " + relation);
      }
  }

  const Prompt& any(const std::string& relation) const {
    auto it = prompts_.find(relation);
    if (it == prompts_.end()) throw ManifestError("no prompt for relation " + relation);
    return it->second;
  }

  ManualTemplate manual(const std::string& relation) const {
    auto it = prompts_.find(relation);
    if (it != prompts_.end()) {
      if (auto* m = std::get_if<ManualTemplate>(&it->second)) return *m;
      throw ManifestError("prompt for relation " + relation + " is not a manual template");
    }
    auto info = corpus_.info.find(relation);
    if (info == corpus_.info.end() || info->second.template_text.empty())
      throw ManifestError("no manual template for relation " + relation);
    return parse_manual_template(relation, info->second.template_text, corpus_.vocabulary);
  }

 private:
  const Corpus& corpus_;
  std::map<std::string, Prompt> prompts_;
};

TokenId train_majority(const RelationDataset& dataset) {
  if (dataset.train().empty()) return kNoToken;
  return fit_class_prior(dataset).relations.begin()->second.majority;
}

RelationOutcome run_relation(const ExperimentManifest& manifest, const Corpus& corpus, const Model* model,
                             const PromptSource& prompts, const std::string& relation) {
  const auto& dataset = corpus.at(relation);
  const auto& vocabulary = corpus.vocabulary;
  const TokenId majority = train_majority(dataset);
  RelationOutcome out;

  if (is_baseline(manifest.method)) {
    std::function<TokenId(const Fact&)> predict;
    if (manifest.method == Method::ClassPrior) {
      auto fitted = std::make_shared<ClassPriorModel>(fit_class_prior(dataset));
      predict = [fitted](const Fact& f) { return predict_class_prior(*fitted, f); };
    } else {
      auto fitted = std::make_shared<NaiveBayesModel>(fit_naive_bayes(dataset, vocabulary));
      predict = [fitted](const Fact& f) { return predict_naive_bayes(*fitted, f); };
    }
    for (const auto& f : dataset.test()) out.records.push_back(make_record(f, predict(f), majority, &vocabulary));
    return out;
  }

  std::vector<TokenId> candidates =
      manifest.restrict_to_seen_objects ? seen_objects(dataset) : vocabulary.content_ids();
  auto config = manifest.train_config();
  config.seed = derive_seed(manifest.seed, relation);

  const Model* predictor = model;
  switch (manifest.method) {
    case Method::Manual:
      out.prompt = prompts.manual(relation);
      break;
    case Method::TriggerFile:
      out.prompt = prompts.any(relation);
      break;
    case Method::DenseRandom:
    case Method::DenseManual: {
      auto init = manifest.method == Method::DenseRandom ? dense_random(relation, manifest.m, *model, config.seed)
                                                         : dense_from_manual(prompts.manual(relation), *model);
      auto [dense, trace] = train_optiprompt(*model, dataset, init, config, candidates);
      out.prompt = std::move(dense);
      out.trace = std::move(trace);
      break;
    }
    case Method::AutoPromptLite: {
      std::set<TokenId> banned(vocabulary.special_ids());
      for (const auto& f : dataset.train()) banned.insert(f.object_id);
      for (const auto& f : dataset.dev()) banned.insert(f.object_id);
      for (const auto& t : manifest.banned_tokens) banned.insert(vocabulary.id(t));
      auto [trigger, trace] =
          train_autoprompt_lite(*model, dataset, manifest.m, config, manifest.candidates_per_step, banned, candidates);
      out.prompt = std::move(trigger);
      out.trace = std::move(trace);
      break;
    }
    case Method::Finetune: {
      auto manual = prompts.manual(relation);
      auto [tuned, trace] = finetune(*model, dataset, manual, config, candidates);
      out.prompt = manual;
      out.model = std::move(tuned);
      out.trace = std::move(trace);
      predictor = &*out.model;
      break;
    }
    default:
      break;
  }
  for (const auto& f : dataset.test())
    out.records.push_back(predict_top1(*predictor, *out.prompt, f, candidates, majority, &vocabulary));
  return out;
}

// Runs `job(i)` for i in [0, n) on up to `jobs` threads; rethrows the error of
// the lowest failing index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

fs::path staging_dir(const fs::path& out) {
  auto name = out.filename().string();
  if (name.empty()) name = out.parent_path().filename().string();
  auto parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
  for (int i = 0;; ++i) {
    auto candidate = parent / ("." + name + ".partial-" + std::to_string(i));
    if (!fs::exists(candidate)) return candidate;
  }
}

}  // namespace

RunResult run(const ExperimentManifest& manifest, std::ostream& log) {
  const fs::path out = manifest.output_dir;
  if (fs::exists(out)) throw ArgumentError("output directory already exists: " + out.string());
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const fs::path stage = staging_dir(out);
  fs::create_directories(stage);
  const auto started = std::chrono::steady_clock::now();

  try {
    write_text(stage / "manifest.json", manifest.text);

    CorpusLoadSummary summary;
    auto corpus = load_manifest_corpus(manifest, &summary);
    for (const auto& e : summary.entries)
      if (e.skipped_multi_token || e.skipped_subject)
        log << "warning: " << e.relation << ": skipped " << e.skipped_multi_token << " multi-token-object and "
            << e.skipped_subject << " unusable-subject facts\n";

    std::optional<Model> model;
    json card;
    if (is_baseline(manifest.method)) {
      card = {{"method", to_string(manifest.method)}, {"model", nullptr}, {"seed", manifest.seed}};
    } else {
      model = build_model(manifest, corpus.vocabulary);
      card = model_card(model->config, manifest.init_regime());
      card["method"] = to_string(manifest.method);
      card["seed"] = manifest.seed;
      card["tensor_sha256"] = tensor_hash(*model);
      if (is_trained(manifest.method)) card["train"] = to_json(manifest.train_config());
    }
    write_text(stage / "model_card.json", card.dump(2) + "\n");

    const PromptSource prompts(manifest, corpus);
    std::vector<std::string> relations;
    for (const auto& [relation, _] : corpus.relations) relations.push_back(relation);
    std::vector<RelationOutcome> outcomes(relations.size());
    parallel_for(relations.size(), manifest.jobs, [&](std::size_t i) {
      outcomes[i] = run_relation(manifest, corpus, model ? &*model : nullptr, prompts, relations[i]);
    });

    MethodReport method{to_string(manifest.method), {}, {}};
    std::vector<Prompt> trained_prompts;
    for (std::size_t i = 0; i < relations.size(); ++i) {
      auto& o = outcomes[i];
      if (o.prompt) trained_prompts.push_back(*o.prompt);
      if (o.trace) write_text(stage / "traces" / (relations[i] + ".csv"), trace_csv(*o.trace));
      if (o.model) {
        fs::create_directories(stage / "checkpoints");
        save_checkpoint(*o.model, stage / "checkpoints" / relations[i]);
      }
      method.records.insert(method.records.end(), o.records.begin(), o.records.end());
    }
    if (!trained_prompts.empty()) save_prompts(stage / "prompts.jsonl", trained_prompts, corpus.vocabulary);
    if (manifest.method == Method::ClassPrior)
      write_text(stage / "baseline.json", to_json(fit_class_prior(corpus)).dump(2) + "\n");
    if (manifest.method == Method::NaiveBayes)
      write_text(stage / "baseline.json", to_json(fit_naive_bayes(corpus)).dump(2) + "\n");

    write_predictions(stage / "predictions.jsonl", method.records);
    method.report = evaluate(method.records, corpus);
    for (const auto& w : method.report.warnings) log << "warning: " << w << "\n";
    const std::vector<MethodReport> methods{method};
    write_text(stage / "report.tsv", emit_report(methods, nullptr, ReportFormat::Tsv));
    write_text(stage / "report.md", emit_report(methods, nullptr, ReportFormat::Markdown));
    write_text(stage / "decomposition.tsv", emit_decomposition(method.report, ReportFormat::Tsv));
    write_text(stage / "decomposition.md", emit_decomposition(method.report, ReportFormat::Markdown));

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_text(stage / "timing.json", json{{"wall_seconds", seconds}}.dump() + "\n");
    fs::rename(stage, out);
    return {out, std::move(method)};
  } catch (const std::exception& e) {
    std::string kind = "internal";
    if (auto* err = dynamic_cast<const Error*>(&e)) kind = err->kind();
    try {
      write_text(stage / "FAILED", json{{"error", kind}, {"message", e.what()}}.dump() + "\n");
      fs::rename(stage, out);
    } catch (...) {
    }
    throw;
  }
}

LoadedRun load_run(const fs::path& dir) {
  auto path = dir / "predictions.jsonl";
  if (fs::exists(dir / "FAILED")) throw ComparisonError(dir.string() + " is a failed run");
  if (!fs::exists(path)) throw ComparisonError(dir.string() + " has no predictions.jsonl");
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return {name, read_predictions(path)};
}

Comparison compare(const std::vector<LoadedRun>& runs, std::size_t sample, std::uint64_t seed) {
  if (runs.empty()) throw ComparisonError("nothing to compare");
  std::vector<std::map<std::string, const PredictionRecord*>> index(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const auto& r : runs[i].records)
      if (!index[i].emplace(r.fact.uid, &r).second)
        throw ComparisonError(runs[i].name + " has two predictions for fact " + r.fact.uid);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    bool same = index[i].size() == index[0].size();
    for (auto a = index[0].begin(), b = index[i].begin(); same && a != index[0].end(); ++a, ++b)
      same = a->first == b->first && a->second->fact.object_id == b->second->fact.object_id;
    if (!same) throw ComparisonError(runs[i].name + " and " + runs[0].name + " cover different test sets");
  }

  Comparison c;
  for (const auto& r : runs) c.methods.push_back(r.name);
  for (const auto& [uid, _] : index[0]) c.uids.push_back(uid);

  const std::size_t n = runs.size();
  c.agreement.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (c.uids.empty()) continue;
      std::size_t agree = 0;
      for (const auto& uid : c.uids)
        if (index[a].at(uid)->predicted == index[b].at(uid)->predicted) ++agree;
      c.agreement[a][b] = static_cast<double>(agree) / static_cast<double>(c.uids.size());
    }

  std::vector<std::string> rows = c.uids;
  if (sample > 0 && sample < rows.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(sample);
    std::sort(rows.begin(), rows.end());
  }
  std::ostringstream table;
  table << "uid\trelation\tsubject\tobject";
  for (const auto& m : c.methods) table << "\t" << m;
  table << "\n";
  for (const auto& uid : rows) {
    const auto& f = index[0].at(uid)->fact;
    table << uid << "\t" << f.relation << "\t" << f.subject << "\t" << f.object;
    for (std::size_t i = 0; i < n; ++i) {
      const auto* r = index[i].at(uid);
      table << "\t" << (r->predicted_token.empty() ? std::to_string(r->predicted) : r->predicted_token)
            << (r->correct ? " (+)" : "");
    }
    table << "\n";
  }
  c.table = table.str();

  std::ostringstream agreement;
  agreement << "method";
  for (const auto& m : c.methods) agreement << "\t" << m;
  agreement << "\n";
  for (std::size_t a = 0; a < n; ++a) {
    agreement << c.methods[a];
    for (std::size_t b = 0; b < n; ++b) agreement << "\t" << format_double(c.agreement[a][b]);
    agreement << "\n";
  }
  c.agreement_table = agreement.str();
  return c;
}

std::vector<MethodReport> method_reports(const std::vector<LoadedRun>& runs, const Corpus& corpus) {
  std::vector<MethodReport> out;
  for (const auto& r : runs) out.push_back({r.name, evaluate(r.records, corpus), r.records});
  return out;
}

}  // namespace optiprobe
