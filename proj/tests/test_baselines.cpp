#include <algorithm>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "optiprobe/baselines.hpp"
#include "optiprobe/error.hpp"
#include "support/fixtures.hpp"

using namespace optiprobe;
using optiprobe::testing::make_fact;
using optiprobe::testing::make_micro_corpus;
using optiprobe::testing::make_vocabulary;

namespace {

RelationDataset dataset_of(const Vocabulary& v, const std::vector<std::pair<std::string, std::string>>& train,
                           const std::vector<std::pair<std::string, std::string>>& test = {}) {
  std::vector<Fact> tr, te;
  int i = 0;
  for (const auto& [s, o] : train) tr.push_back(make_fact(v, "P1", s, o, "tr" + std::to_string(i++)));
  for (const auto& [s, o] : test) te.push_back(make_fact(v, "P1", s, o, "te" + std::to_string(i++)));
  return RelationDataset("P1", Category::ManyToOne, tr, {}, te, true);
}

}  // namespace

TEST(ClassPrior, NativeLanguageCounts) {
  auto v = make_vocabulary({"French", "German", "s"});
  std::vector<std::pair<std::string, std::string>> train;
  for (int i = 0; i < 6; ++i) train.emplace_back("s", "French");
  for (int i = 0; i < 4; ++i) train.emplace_back("s", "German");
  auto model = fit_class_prior(dataset_of(v, train));
  const auto& prior = model.at("P1");
  EXPECT_EQ(prior.total, 10);
  EXPECT_EQ(prior.majority, v.id("French"));
  EXPECT_DOUBLE_EQ(prior.probability(v.id("French")), 0.6);
  EXPECT_DOUBLE_EQ(prior.probability(v.id("s")), 0.0);

  int sum = 0;
  for (const auto& [_, c] : prior.counts) sum += c;
  EXPECT_EQ(sum, prior.total);

  auto a = make_fact(v, "P1", "s", "German", "q1");
  auto b = make_fact(v, "P1", "French German", "German", "q2");
  EXPECT_EQ(predict_class_prior(model, a), v.id("French"));
  EXPECT_EQ(predict_class_prior(model, b), v.id("French"));
}

TEST(ClassPrior, SingleClassAndTies) {
  auto v = make_vocabulary({"x", "y", "s"});
  auto single = fit_class_prior(dataset_of(v, {{"s", "x"}}));
  EXPECT_EQ(single.at("P1").majority, v.id("x"));
  EXPECT_DOUBLE_EQ(single.at("P1").probability(v.id("x")), 1.0);

  auto tie = fit_class_prior(dataset_of(v, {{"s", "y"}, {"s", "x"}, {"s", "y"}, {"s", "x"}}));
  EXPECT_EQ(tie.at("P1").majority, v.id("x"));
}

TEST(ClassPrior, Errors) {
  auto v = make_vocabulary({"x", "s"});
  EXPECT_THROW(fit_class_prior(dataset_of(v, {})), FitError);
  auto model = fit_class_prior(dataset_of(v, {{"s", "x"}}));
  EXPECT_THROW(predict_class_prior(model, make_fact(v, "P9", "s", "x", "q")), LookupError);
}

TEST(NaiveBayes, HandComputedConditional) {
  // content tokens: [UNK], a, b, x
  auto v = make_vocabulary({"a", "b", "x"});
  auto model = fit_naive_bayes(dataset_of(v, {{"a", "x"}}), v);
  EXPECT_EQ(model.content_vocabulary_size, 4u);
  EXPECT_DOUBLE_EQ(model.conditional("P1", v.id("x"), v.id("a")), 0.4);
  EXPECT_DOUBLE_EQ(model.conditional("P1", v.id("x"), v.id("b")), 0.2);
  EXPECT_DOUBLE_EQ(model.normaliser("P1", v.id("x")), 5.0);
}

TEST(NaiveBayes, SmoothedConditionalsArePositiveAndNormalised) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto micro = make_micro_corpus(rng);
    auto model = fit_naive_bayes(micro.dataset, micro.vocabulary);
    const auto& rel = model.at("micro");
    for (const auto& [object, _] : rel.object_counts) {
      double sum = 0.0, mass = 0.0;
      for (TokenId w : micro.vocabulary.content_ids()) {
        const double p = model.conditional("micro", object, w);
        EXPECT_GT(p, 0.0);
        sum += p;
        mass += rel.count(object, w) + 1;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_DOUBLE_EQ(mass, model.normaliser("micro", object));
    }
  }
}

TEST(NaiveBayes, SubjectTokenBeatsClassPrior) {
  std::vector<std::string> content{"football", "basketball", "FIFA", "NBA"};
  for (int i = 0; i < 10; ++i) content.push_back("n" + std::to_string(i));
  auto v = make_vocabulary(content);
  std::vector<std::pair<std::string, std::string>> train;
  for (int i = 0; i < 3; ++i) train.emplace_back("football n" + std::to_string(i), "FIFA");
  for (int i = 3; i < 10; ++i) train.emplace_back("basketball n" + std::to_string(i), "NBA");
  auto ds = dataset_of(v, train);
  auto prior = fit_class_prior(ds);
  auto nb = fit_naive_bayes(ds, v);
  auto query = make_fact(v, "P1", "football n9", "FIFA", "q");
  EXPECT_EQ(predict_class_prior(prior, query), v.id("NBA"));
  EXPECT_EQ(predict_naive_bayes(nb, query), v.id("FIFA"));
  EXPECT_GT(nb.conditional("P1", v.id("FIFA"), v.id("football")),
            nb.conditional("P1", v.id("NBA"), v.id("football")));
}

TEST(NaiveBayes, UnseenSubjectFallsBackToPriorWithEqualMass) {
  auto v = make_vocabulary({"a", "b", "c", "d", "x", "y"});
  // Z(x) = Z(y): both objects carry two subject tokens
  auto ds = dataset_of(v, {{"a", "x"}, {"b", "x"}, {"c c", "y"}});
  auto nb = fit_naive_bayes(ds, v);
  EXPECT_DOUBLE_EQ(nb.normaliser("P1", v.id("x")), nb.normaliser("P1", v.id("y")));
  EXPECT_EQ(predict_naive_bayes(nb, make_fact(v, "P1", "d", "y", "q")), fit_class_prior(ds).at("P1").majority);
}

TEST(NaiveBayes, SingleClass) {
  auto v = make_vocabulary({"a", "b", "x"});
  auto nb = fit_naive_bayes(dataset_of(v, {{"a", "x"}, {"b", "x"}}), v);
  EXPECT_EQ(predict_naive_bayes(nb, make_fact(v, "P1", "b b a", "x", "q")), v.id("x"));
}

TEST(NaiveBayes, RepeatedTokensCountPerOccurrence) {
  auto v = make_vocabulary({"a", "b", "x", "y"});
  auto nb = fit_naive_bayes(dataset_of(v, {{"a a", "x"}, {"b", "y"}}), v);
  EXPECT_EQ(nb.at("P1").count(v.id("x"), v.id("a")), 2);
  auto once = make_fact(v, "P1", "a", "x", "q1");
  auto twice = make_fact(v, "P1", "a a", "x", "q2");
  const double step = std::log(nb.conditional("P1", v.id("x"), v.id("a")));
  EXPECT_NEAR(nb.log_score(twice, v.id("x")) - nb.log_score(once, v.id("x")), step, 1e-12);
}

TEST(NaiveBayes, PredictionDependsOnTokenMultisetOnly) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto micro = make_micro_corpus(rng);
    auto nb = fit_naive_bayes(micro.dataset, micro.vocabulary);
    for (const auto& f : micro.dataset.test()) {
      auto shuffled = f;
      std::shuffle(shuffled.subject_tokens.begin(), shuffled.subject_tokens.end(), rng);
      EXPECT_EQ(predict_naive_bayes(nb, shuffled), predict_naive_bayes(nb, f));
      for (const auto& [o, _] : nb.at("micro").object_counts)
        EXPECT_NEAR(nb.log_score(shuffled, o), nb.log_score(f, o), 1e-12);
    }
  }
}

TEST(NaiveBayes, ArgmaxInvariantUnderCommonShift) {
  // Multiplying every unnormalised posterior by a constant is a common shift in
  // log space; the argmax recomputed from shifted scores must not move.
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto micro = make_micro_corpus(rng);
    auto nb = fit_naive_bayes(micro.dataset, micro.vocabulary);
    const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    for (const auto& f : micro.dataset.test()) {
      TokenId best = kNoToken;
      double best_score = 0.0;
      for (const auto& [o, _] : nb.at("micro").object_counts) {
        const double s = nb.log_score(f, o) + shift;
        if (best == kNoToken || s > best_score + 1e-9 * std::abs(best_score)) {
          best = o;
          best_score = s;
        }
      }
      EXPECT_EQ(predict_naive_bayes(nb, f), best);
    }
  }
}

TEST(Baselines, JsonRoundTrip) {
  std::mt19937_64 rng(21);
  auto micro = make_micro_corpus(rng);
  auto prior = fit_class_prior(micro.dataset);
  auto nb = fit_naive_bayes(micro.dataset, micro.vocabulary);
  auto prior2 = class_prior_from_json(nlohmann::json::parse(to_json(prior).dump()));
  auto nb2 = naive_bayes_from_json(nlohmann::json::parse(to_json(nb).dump()));
  EXPECT_EQ(prior2.at("micro").counts, prior.at("micro").counts);
  EXPECT_EQ(prior2.at("micro").majority, prior.at("micro").majority);
  EXPECT_EQ(nb2.content_vocabulary_size, nb.content_vocabulary_size);
  EXPECT_EQ(nb2.at("micro").cooccurrence, nb.at("micro").cooccurrence);
  for (const auto& f : micro.dataset.test()) EXPECT_EQ(predict_naive_bayes(nb2, f), predict_naive_bayes(nb, f));
  EXPECT_THROW(class_prior_from_json(to_json(nb)), ParseError);
  EXPECT_THROW(naive_bayes_from_json(to_json(prior)), ParseError);
}
