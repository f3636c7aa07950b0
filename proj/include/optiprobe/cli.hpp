#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optiprobe/eval.hpp"
#include "optiprobe/mlm.hpp"
#include "optiprobe/optimize.hpp"

namespace optiprobe {

enum class Method { Manual, TriggerFile, DenseRandom, DenseManual, AutoPromptLite, Finetune, ClassPrior, NaiveBayes };

const char* to_string(Method method);
Method parse_method(std::string_view text);
bool is_baseline(Method method);
bool is_trained(Method method);

/// One experiment, read from a JSON manifest. Relative paths resolve against
/// the manifest's directory.
///
///   {
///     "data_dir": "corpus", "relations": ["P19"], "vocabulary": "vocab.txt",
///     "relation_metadata": "relations.jsonl", "prompts": "prompts.jsonl",
///     "test_file": "test.jsonl", "dev_fraction": 0.2, "allow_overlap": false,
///     "model": {"embed_dim": 16, "num_layers": 1, ...},
///     "regime": {"kind": "random-model"},
///     "method": "dense-manual",
///     "method_options": {"m": 5, "candidates_per_step": 10, "restrict_to_seen_objects": false},
///     "train": {"epochs": 10, "learning_rate": 3e-3},
///     "output_dir": "runs/p19", "seed": 7, "jobs": 4
///   }
///
/// Regime seeds left out default to the manifest seed.
struct ExperimentManifest {
  std::string text;  // verbatim source
  std::filesystem::path base_dir;

  CorpusLoadOptions corpus;
  std::filesystem::path vocabulary;
  std::optional<std::filesystem::path> relation_metadata;
  std::optional<std::filesystem::path> prompts;

  nlohmann::json model = nlohmann::json::object();
  nlohmann::json regime;
  Method method = Method::Manual;
  int m = 5;
  int candidates_per_step = 10;
  bool restrict_to_seen_objects = false;
  std::vector<std::string> banned_tokens;
  nlohmann::json train = nlohmann::json::object();

  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int jobs = 1;

  // Regime with defaulted seeds and resolved checkpoint paths.
  InitRegime init_regime() const;
  TrainConfig train_config() const;
  // Every input path that must exist before a run starts.
  std::vector<std::filesystem::path> input_paths() const;
};

ExperimentManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
ExperimentManifest load_manifest(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::filesystem::path> out;
};
void apply(ExperimentManifest& manifest, const Overrides& overrides);

// Independent, stable per-relation seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& relation);

struct RunResult {
  std::filesystem::path output_dir;
  MethodReport method;
};

/// Loads the corpus, builds or fits the predictor for every relation, predicts
/// the test split and writes the artifact directory:
///
///   manifest.json            verbatim copy
///   model_card.json          config, regime, seed (prompt and fine-tune methods)
///   prompts.jsonl            evaluated or trained prompts
///   checkpoints/<rel>.*      fine-tuned models
///   baseline.json            fitted baseline counts
///   predictions.jsonl
///   traces/<rel>.csv         epoch, train_nll, dev_acc
///   report.tsv, report.md    accuracy table
///   decomposition.tsv/.md    majority/other split and elicitation rate
///   timing.json              wall-clock seconds (not deterministic)
///
/// The directory is assembled under a temporary name and renamed into place.
/// On failure it is still moved into place with a FAILED file holding the
/// error, and the error is rethrown.
RunResult run(const ExperimentManifest& manifest, std::ostream& log);

// Corpus and vocabulary as described by a manifest.
Corpus load_manifest_corpus(const ExperimentManifest& manifest, CorpusLoadSummary* summary = nullptr);

/// Writes the ingested corpus (vocabulary.txt, <rel>/{train,dev,test}.jsonl,
/// summary.tsv) to `out`.
CorpusLoadSummary ingest(const ExperimentManifest& manifest, const std::filesystem::path& out);

struct LoadedRun {
  std::string name;  // directory name
  std::vector<PredictionRecord> records;
};
LoadedRun load_run(const std::filesystem::path& dir);

/// Per-fact side-by-side predictions plus pairwise agreement. Throws
/// ComparisonError unless every run covers the same fact ids.
struct Comparison {
  std::vector<std::string> methods;
  std::vector<std::string> uids;  // sorted
  std::vector<std::vector<double>> agreement;  // methods x methods
  std::string table;                           // TSV, one row per (sampled) fact
  std::string agreement_table;                 // TSV
};
Comparison compare(const std::vector<LoadedRun>& runs, std::size_t sample, std::uint64_t seed);

// Combined accuracy table over several runs, with Easy/Hard columns when a
// partition is given.
std::vector<MethodReport> method_reports(const std::vector<LoadedRun>& runs, const Corpus& corpus);

// Writes a file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace optiprobe
