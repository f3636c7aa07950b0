#include "optiprobe/baselines.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "optiprobe/error.hpp"

namespace optiprobe {

using nlohmann::json;

namespace {

// Relative tolerance under which two log scores count as tied. Exact rational
// ties can differ by a few ulps after summing logs in different orders.
constexpr double kTieTolerance = 1e-10;

bool strictly_greater(double a, double b) {
  return a - b > kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

TokenId majority_of(const std::map<TokenId, int>& counts) {
  TokenId best = kNoToken;
  int best_count = -1;
  for (auto [object, count] : counts)  // ascending id, so '>' keeps the lowest id on ties
    if (count > best_count) {
      best = object;
      best_count = count;
    }
  return best;
}

ClassPrior fit_prior(const RelationDataset& dataset) {
  if (dataset.train().empty()) throw FitError("class prior: relation " + dataset.relation() + " has no training facts");
  ClassPrior prior;
  for (const auto& f : dataset.train()) ++prior.counts[f.object_id];
  prior.total = static_cast<int>(dataset.train().size());
  prior.majority = majority_of(prior.counts);
  return prior;
}

NaiveBayesRelation fit_nb(const RelationDataset& dataset) {
  if (dataset.train().empty()) throw FitError("naive bayes: relation " + dataset.relation() + " has no training facts");
  NaiveBayesRelation nb;
  for (const auto& f : dataset.train()) {
    ++nb.object_counts[f.object_id];
    for (TokenId w : f.subject_tokens) {
      ++nb.cooccurrence[{f.object_id, w}];
      ++nb.token_mass[f.object_id];
    }
  }
  nb.total = static_cast<int>(dataset.train().size());
  return nb;
}

}  // namespace

double ClassPrior::probability(TokenId object) const {
  auto it = counts.find(object);
  return it == counts.end() || total == 0 ? 0.0 : static_cast<double>(it->second) / total;
}

const ClassPrior& ClassPriorModel::at(const std::string& relation) const {
  auto it = relations.find(relation);
  if (it == relations.end()) throw LookupError("class prior not fit for relation " + relation);
  return it->second;
}

ClassPriorModel fit_class_prior(const RelationDataset& dataset) {
  ClassPriorModel model;
  model.relations[dataset.relation()] = fit_prior(dataset);
  return model;
}

ClassPriorModel fit_class_prior(const Corpus& corpus) {
  ClassPriorModel model;
  for (const auto& [relation, dataset] : corpus.relations) model.relations[relation] = fit_prior(dataset);
  return model;
}

TokenId predict_class_prior(const ClassPriorModel& model, const Fact& fact) {
  return model.at(fact.relation).majority;
}

int NaiveBayesRelation::count(TokenId object, TokenId token) const {
  auto it = cooccurrence.find({object, token});
  return it == cooccurrence.end() ? 0 : it->second;
}

const NaiveBayesRelation& NaiveBayesModel::at(const std::string& relation) const {
  auto it = relations.find(relation);
  if (it == relations.end()) throw LookupError("naive bayes not fit for relation " + relation);
  return it->second;
}

double NaiveBayesModel::normaliser(const std::string& relation, TokenId object) const {
  const auto& nb = at(relation);
  auto it = nb.token_mass.find(object);
  long mass = it == nb.token_mass.end() ? 0 : it->second;
  return static_cast<double>(mass) + static_cast<double>(content_vocabulary_size);
}

double NaiveBayesModel::conditional(const std::string& relation, TokenId object, TokenId token) const {
  return (at(relation).count(object, token) + 1.0) / normaliser(relation, object);
}

double NaiveBayesModel::log_score(const Fact& fact, TokenId object) const {
  const auto& nb = at(fact.relation);
  auto it = nb.object_counts.find(object);
  if (it == nb.object_counts.end()) return -std::numeric_limits<double>::infinity();
  double log_z = std::log(normaliser(fact.relation, object));
  double score = std::log(static_cast<double>(it->second) / nb.total);
  for (TokenId w : fact.subject_tokens) score += std::log(nb.count(object, w) + 1.0) - log_z;
  return score;
}

NaiveBayesModel fit_naive_bayes(const RelationDataset& dataset, const Vocabulary& vocabulary) {
  NaiveBayesModel model;
  model.content_vocabulary_size = vocabulary.content_ids().size();
  model.relations[dataset.relation()] = fit_nb(dataset);
  return model;
}

NaiveBayesModel fit_naive_bayes(const Corpus& corpus) {
  NaiveBayesModel model;
  model.content_vocabulary_size = corpus.vocabulary.content_ids().size();
  for (const auto& [relation, dataset] : corpus.relations) model.relations[relation] = fit_nb(dataset);
  return model;
}

TokenId predict_naive_bayes(const NaiveBayesModel& model, const Fact& fact) {
  const auto& nb = model.at(fact.relation);
  TokenId best = kNoToken;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [object, count] : nb.object_counts) {
    double score = model.log_score(fact, object);
    if (best == kNoToken || strictly_greater(score, best_score)) {
      best = object;
      best_score = score;
    }
  }
  return best;
}

json to_json(const ClassPriorModel& model) {
  json relations = json::object();
  for (const auto& [relation, prior] : model.relations) {
    json counts = json::array();
    for (auto [object, count] : prior.counts) counts.push_back({object, count});
    relations[relation] = {{"counts", counts}};
  }
  return {{"kind", "class-prior"}, {"relations", relations}};
}

ClassPriorModel class_prior_from_json(const json& doc) {
  if (doc.value("kind", "") != "class-prior") throw ParseError("not a class-prior document");
  ClassPriorModel model;
  for (const auto& [relation, body] : doc.at("relations").items()) {
    ClassPrior prior;
    for (const auto& pair : body.at("counts")) {
      prior.counts[pair.at(0).get<TokenId>()] = pair.at(1).get<int>();
      prior.total += pair.at(1).get<int>();
    }
    prior.majority = majority_of(prior.counts);
    model.relations[relation] = std::move(prior);
  }
  return model;
}

json to_json(const NaiveBayesModel& model) {
  json relations = json::object();
  for (const auto& [relation, nb] : model.relations) {
    json objects = json::array();
    for (auto [object, count] : nb.object_counts) objects.push_back({object, count});
    json cooc = json::array();
    for (const auto& [key, count] : nb.cooccurrence) cooc.push_back({key.first, key.second, count});
    relations[relation] = {{"objects", objects}, {"cooccurrence", cooc}};
  }
  return {{"kind", "naive-bayes"},
          {"content_vocabulary_size", model.content_vocabulary_size},
          {"relations", relations}};
}

NaiveBayesModel naive_bayes_from_json(const json& doc) {
  if (doc.value("kind", "") != "naive-bayes") throw ParseError("not a naive-bayes document");
  NaiveBayesModel model;
  model.content_vocabulary_size = doc.at("content_vocabulary_size").get<std::size_t>();
  for (const auto& [relation, body] : doc.at("relations").items()) {
    NaiveBayesRelation nb;
    for (const auto& pair : body.at("objects")) {
      nb.object_counts[pair.at(0).get<TokenId>()] = pair.at(1).get<int>();
      nb.total += pair.at(1).get<int>();
    }
    for (const auto& triple : body.at("cooccurrence")) {
      TokenId object = triple.at(0).get<TokenId>();
      int count = triple.at(2).get<int>();
      nb.cooccurrence[{object, triple.at(1).get<TokenId>()}] = count;
      nb.token_mass[object] += count;
    }
    model.relations[relation] = std::move(nb);
  }
  return model;
}

}  // namespace optiprobe
