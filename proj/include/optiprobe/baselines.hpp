#pragma once

#include <map>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "optiprobe/corpus.hpp"

namespace optiprobe {

/// Per-relation object label frequencies over the training split.
struct ClassPrior {
  std::map<TokenId, int> counts;
  int total = 0;
  TokenId majority = kNoToken;  // highest count, lowest id on ties

  double probability(TokenId object) const;
};

/// Predicts the most frequent training object of a relation for every subject.
struct ClassPriorModel {
  std::map<std::string, ClassPrior> relations;

  const ClassPrior& at(const std::string& relation) const;
};

/// Multinomial Naive Bayes over subject tokens with add-one smoothed
/// P(o | w) = (count(o, w) + 1) / sum_w' (count(o, w') + 1), the sum running over
/// every content token of the vocabulary. P(o | r) is the unsmoothed relative
/// frequency, so only objects seen in training are candidates.
struct NaiveBayesRelation {
  std::map<TokenId, int> object_counts;
  std::map<std::pair<TokenId, TokenId>, int> cooccurrence;  // (object, token) -> count
  std::map<TokenId, long> token_mass;                       // object -> sum_w count(o, w)
  int total = 0;

  int count(TokenId object, TokenId token) const;
};

struct NaiveBayesModel {
  std::map<std::string, NaiveBayesRelation> relations;
  std::size_t content_vocabulary_size = 0;

  const NaiveBayesRelation& at(const std::string& relation) const;
  /// Smoothed P(o | w).
  double conditional(const std::string& relation, TokenId object, TokenId token) const;
  /// Smoothing normaliser Z(o) = sum_w (count(o, w) + 1).
  double normaliser(const std::string& relation, TokenId object) const;
  /// Unnormalised log posterior log P(o | r) + sum_i log P(o | w_i).
  double log_score(const Fact& fact, TokenId object) const;
};

ClassPriorModel fit_class_prior(const RelationDataset& dataset);
ClassPriorModel fit_class_prior(const Corpus& corpus);
TokenId predict_class_prior(const ClassPriorModel& model, const Fact& fact);

NaiveBayesModel fit_naive_bayes(const RelationDataset& dataset, const Vocabulary& vocabulary);
NaiveBayesModel fit_naive_bayes(const Corpus& corpus);
TokenId predict_naive_bayes(const NaiveBayesModel& model, const Fact& fact);

// Counts only; probabilities are recomputed after loading.
nlohmann::json to_json(const ClassPriorModel& model);
nlohmann::json to_json(const NaiveBayesModel& model);
ClassPriorModel class_prior_from_json(const nlohmann::json& doc);
NaiveBayesModel naive_bayes_from_json(const nlohmann::json& doc);

}  // namespace optiprobe
