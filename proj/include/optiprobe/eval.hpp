#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "optiprobe/baselines.hpp"
#include "optiprobe/corpus.hpp"
#include "optiprobe/mlm.hpp"
#include "optiprobe/prompts.hpp"

namespace optiprobe {

using Rational = boost::multiprecision::cpp_rational;

struct PredictionRecord {
  Fact fact;
  TokenId predicted = kNoToken;
  std::string predicted_token;
  bool correct = false;
  bool is_train_majority = false;
};

PredictionRecord make_record(const Fact& fact, TokenId predicted, TokenId train_majority,
                             const Vocabulary* vocabulary = nullptr);

// Argmax of the mask logits over `candidates` (ascending ids, specials
// excluded by the caller), lowest id on ties.
PredictionRecord predict_top1(const Model& model, const Prompt& prompt, const Fact& fact,
                              std::span<const TokenId> candidates, TokenId train_majority,
                              const Vocabulary* vocabulary = nullptr);

// Objects seen in training for one relation, for seen-object-only evaluation.
std::vector<TokenId> seen_objects(const RelationDataset& dataset);

struct RelationScore {
  std::string relation;
  std::string name;
  Category category = Category::ManyToMany;
  std::size_t count = 0;
  std::size_t correct = 0;
  std::size_t majority_correct = 0;  // correct and equal to the train majority
  std::size_t other_correct = 0;     // correct and not the train majority
  std::size_t majority_predicted = 0;

  Rational accuracy() const { return Rational(correct, count); }
  Rational majority_part() const { return Rational(majority_correct, count); }
  Rational other_part() const { return Rational(other_correct, count); }
  Rational elicitation_rate() const { return Rational(majority_predicted, count); }
};

/// Per-relation accuracy with its majority/other split, plus two aggregates:
/// the unweighted mean over relations (the headline statistic) and the
/// example-weighted micro accuracy.
struct EvalReport {
  std::vector<RelationScore> relations;  // sorted by relation id
  std::vector<std::string> warnings;

  Rational relation_mean_accuracy;
  Rational relation_mean_majority_part;
  Rational relation_mean_other_part;
  Rational relation_mean_elicitation;
  Rational micro_accuracy;
  std::size_t total_count = 0;

  const RelationScore* find(const std::string& relation) const;
};

double to_double(const Rational& r);

EvalReport evaluate(std::span<const PredictionRecord> records, const Corpus& corpus);

/// Test facts split by whether any training-data-fit predictor gets them right.
struct Partition {
  std::set<std::string> easy;
  std::set<std::string> hard;
  std::map<std::string, std::vector<std::string>> provenance;  // easy uid -> predictor names

  bool is_easy(const std::string& uid) const { return easy.count(uid) != 0; }
};

struct NamedPredictor {
  std::string name;
  std::function<TokenId(const Fact&)> predict;
  std::set<std::string> relations;  // coverage
};

Partition build_partition(std::span<const Fact> test, std::span<const NamedPredictor> predictors);

// One fine-tuned model and template per relation.
struct FineTunedPredictor {
  std::map<std::string, std::shared_ptr<const Model>> models;
  std::map<std::string, ManualTemplate> templates;
  std::vector<TokenId> candidates;
};

Partition build_partition(std::span<const Fact> test, const NaiveBayesModel& naive_bayes,
                          const FineTunedPredictor& finetuned_random_embeddings,
                          const FineTunedPredictor& finetuned_random_model);

// Same semantics from stored prediction dumps, keyed by method name.
Partition build_partition(std::span<const Fact> test,
                          const std::map<std::string, std::vector<PredictionRecord>>& records);

struct MethodReport {
  std::string method;
  EvalReport report;
  std::vector<PredictionRecord> records;
};

enum class ReportFormat { Tsv, Markdown };

/// Table: relation, type, name, count, one accuracy column per method, then
/// Easy/Hard columns per method when a partition is given. Rows end with "All"
/// (relation mean) and "All (micro)".
std::string emit_report(std::span<const MethodReport> methods, const Partition* partition, ReportFormat format);
/// Majority/other decomposition and elicitation rate of a single method.
std::string emit_decomposition(const EvalReport& report, ReportFormat format);

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

void write_partition(const std::filesystem::path& path, const Partition& partition);
Partition read_partition(const std::filesystem::path& path);

}  // namespace optiprobe
