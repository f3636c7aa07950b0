#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "optiprobe/eval.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace optiprobe;
using optiprobe::testing::make_fact;
using optiprobe::testing::make_planted;
using optiprobe::testing::make_skewed;
using optiprobe::testing::make_vocabulary;
using optiprobe::testing::scratch_dir;

namespace {

// Every block tensor is zero, so the mask logits equal the output bias.
Model bias_only_model(const Vocabulary& v, const std::vector<double>& bias) {
  ModelConfig c;
  c.embed_dim = 4;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 4;
  c.max_seq_len = 8;
  c.vocab_size = static_cast<int>(v.size());
  c.mask_id = v.mask_id();
  Model m{c, Parameters<double>::zeros(c)};
  for (std::size_t i = 0; i < bias.size(); ++i) m.params.output_bias(static_cast<Eigen::Index>(i)) = bias[i];
  return m;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

struct RandomEval {
  Corpus corpus;
  std::vector<PredictionRecord> records;
};

RandomEval random_eval(std::mt19937_64& rng) {
  auto v = make_vocabulary({"s", "o0", "o1", "o2"});
  RandomEval out;
  const int relations = std::uniform_int_distribution<int>(1, 5)(rng);
  std::uniform_int_distribution<int> object(0, 2);
  for (int r = 0; r < relations; ++r) {
    const auto name = "R" + std::to_string(r);
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<Fact> test;
    const TokenId majority = v.id("o" + std::to_string(object(rng)));
    for (int i = 0; i < n; ++i) {
      auto f = make_fact(v, name, "s", "o" + std::to_string(object(rng)), name + ":" + std::to_string(i));
      out.records.push_back(make_record(f, v.id("o" + std::to_string(object(rng))), majority, &v));
      test.push_back(std::move(f));
    }
    out.corpus.relations.emplace(name, RelationDataset(name, Category::ManyToMany, {}, {}, test));
  }
  out.corpus.vocabulary = v;
  return out;
}

}  // namespace

TEST(PredictTop1, ArgmaxOverCandidates) {
  auto v = make_vocabulary({"c0", "c1", "c2"});
  // ids: [MASK]=0 ... [UNK]=3, c0=4, c1=5, c2=6
  auto model = bias_only_model(v, {0, 0, 0, 0, 1.0, 2.0, 0.5});
  auto manual = parse_manual_template("P", "[X] [MASK]", v);
  auto f = make_fact(v, "P", "c0", "c1", "u");
  std::vector<TokenId> candidates{4, 5, 6};
  auto rec = predict_top1(model, manual, f, candidates, 4, &v);
  EXPECT_EQ(rec.predicted, 5);
  EXPECT_EQ(rec.predicted_token, "c1");
  EXPECT_TRUE(rec.correct);
  EXPECT_FALSE(rec.is_train_majority);
  EXPECT_THROW(predict_top1(model, manual, f, {}, 4), ArgumentError);
}

TEST(PredictTop1, ExactTieGoesToLowerId) {
  std::vector<std::string> content;
  for (int i = 0; i < 6; ++i) content.push_back("c" + std::to_string(i));
  auto v = make_vocabulary(content);
  std::vector<double> bias(v.size(), 0.0);
  bias[3] = bias[7] = 5.0;
  auto model = bias_only_model(v, bias);
  auto manual = parse_manual_template("P", "[X] [MASK]", v);
  auto f = make_fact(v, "P", "c0", "c3", "u");
  EXPECT_EQ(predict_top1(model, manual, f, v.content_ids(), 3).predicted, 3);
  std::vector<TokenId> without3{4, 5, 6, 7, 8};
  EXPECT_EQ(predict_top1(model, manual, f, without3, 3).predicted, 7);
}

TEST(PredictTop1, ConstantLogitShiftChangesNothing) {
  auto fx = make_planted(4);
  const auto& content = fx.vocabulary.content_ids();
  std::vector<PredictionRecord> before;
  for (const auto& f : fx.dataset.test()) before.push_back(predict_top1(fx.model, fx.golden, f, content, 0));
  fx.model.params.output_bias.array() += 3.25;
  for (std::size_t i = 0; i < before.size(); ++i) {
    auto after = predict_top1(fx.model, fx.golden, fx.dataset.test()[i], content, 0);
    EXPECT_EQ(after.predicted, before[i].predicted);
    EXPECT_EQ(after.correct, before[i].correct);
  }
}

TEST(PredictTop1, GoldenPromptOnPlantedFixture) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto fx = make_planted(seed);
    int correct = 0;
    for (const auto& f : fx.dataset.test())
      correct += predict_top1(fx.model, fx.golden, f, fx.vocabulary.content_ids(), kNoToken).correct;
    EXPECT_GE(correct, 95) << "seed " << seed;
  }
}

TEST(Evaluate, RelationMeanVersusMicro) {
  auto fx = make_skewed();
  auto report = evaluate(fx.records, fx.corpus);
  EXPECT_EQ(report.relation_mean_accuracy, Rational(3, 4));
  EXPECT_EQ(report.micro_accuracy, Rational(510, 1010));
  EXPECT_EQ(report.total_count, 1010u);
  ASSERT_EQ(report.relations.size(), 2u);
  EXPECT_EQ(report.relations[0].relation, "large");
  EXPECT_EQ(report.find("small")->accuracy(), Rational(1));
  EXPECT_EQ(report.find("nope"), nullptr);
}

TEST(Evaluate, AllCorrect) {
  auto fx = make_skewed();
  for (auto& r : fx.records) r = make_record(r.fact, r.fact.object_id, kNoToken);
  auto report = evaluate(fx.records, fx.corpus);
  EXPECT_EQ(report.relation_mean_accuracy, Rational(1));
  for (const auto& s : report.relations) EXPECT_EQ(s.majority_part() + s.other_part(), Rational(1));
}

TEST(Evaluate, MajorityElicitation) {
  auto v = make_vocabulary({"s", "Paris", "Rome"});
  std::vector<Fact> train, test;
  for (int i = 0; i < 10; ++i) train.push_back(make_fact(v, "P", "s", "Paris", "tr" + std::to_string(i)));
  for (int i = 0; i < 100; ++i)
    test.push_back(make_fact(v, "P", "s", i < 22 ? "Paris" : "Rome", "te" + std::to_string(i)));
  Corpus corpus;
  corpus.vocabulary = v;
  corpus.relations.emplace("P", RelationDataset("P", Category::ManyToOne, train, {}, test, true));
  std::vector<PredictionRecord> records;
  for (const auto& f : test) records.push_back(make_record(f, v.id("Paris"), v.id("Paris")));
  auto report = evaluate(records, corpus);
  const auto& s = report.relations.at(0);
  EXPECT_EQ(s.elicitation_rate(), Rational(1));
  EXPECT_EQ(s.accuracy(), Rational(22, 100));
  EXPECT_EQ(s.majority_part(), Rational(22, 100));
  EXPECT_EQ(s.other_part(), Rational(0));
}

TEST(Evaluate, EmptyRelationIsExcludedWithWarning) {
  auto fx = make_skewed();
  auto v = fx.corpus.vocabulary;
  fx.corpus.relations.emplace("empty", RelationDataset("empty", Category::OneToOne, {}, {}, {}));
  auto report = evaluate(fx.records, fx.corpus);
  EXPECT_EQ(report.relations.size(), 2u);
  EXPECT_EQ(report.relation_mean_accuracy, Rational(3, 4));
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("empty"), std::string::npos);

  auto none = evaluate({}, fx.corpus);
  EXPECT_TRUE(none.relations.empty());
  EXPECT_EQ(none.warnings.size(), 4u);

  auto stray = fx.records;
  stray[0].fact.relation = "P999";
  EXPECT_THROW(evaluate(stray, fx.corpus), LookupError);
}

TEST(Evaluate, DecompositionAndPermutationProperties) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto ev = random_eval(rng);
    auto report = evaluate(ev.records, ev.corpus);
    Rational mean = 0;
    for (const auto& s : report.relations) {
      EXPECT_EQ(s.majority_part() + s.other_part(), s.accuracy());
      EXPECT_EQ(s.correct, s.majority_correct + s.other_correct);
      mean += s.accuracy();
    }
    EXPECT_EQ(report.relation_mean_accuracy, mean / static_cast<long long>(report.relations.size()));
    EXPECT_EQ(report.relation_mean_majority_part + report.relation_mean_other_part, report.relation_mean_accuracy);

    auto shuffled = ev.records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto again = evaluate(shuffled, ev.corpus);
    std::vector<MethodReport> a{{"m", report, ev.records}}, b{{"m", again, shuffled}};
    EXPECT_EQ(emit_report(a, nullptr, ReportFormat::Tsv), emit_report(b, nullptr, ReportFormat::Tsv));
    EXPECT_EQ(emit_decomposition(report, ReportFormat::Tsv), emit_decomposition(again, ReportFormat::Tsv));
  }
}

TEST(Partition, UnionOfCorrectPredictors) {
  auto v = make_vocabulary({"a", "b", "x", "y"});
  std::vector<Fact> test{make_fact(v, "P", "a", "x", "A"), make_fact(v, "P", "b", "y", "B"),
                         make_fact(v, "P", "a", "y", "C")};
  auto wrong = [&](const Fact& f) { return f.object_id == v.id("x") ? v.id("y") : v.id("x"); };
  auto only = [&](std::string uid) {
    return [&, uid](const Fact& f) { return f.uid == uid ? f.object_id : wrong(f); };
  };
  std::vector<NamedPredictor> none{{"nb", wrong, {"P"}}, {"ft1", wrong, {"P"}}, {"ft2", wrong, {"P"}}};
  auto p = build_partition(test, none);
  EXPECT_TRUE(p.easy.empty());
  EXPECT_EQ(p.hard, (std::set<std::string>{"A", "B", "C"}));

  std::vector<NamedPredictor> some{{"nb", only("A"), {"P"}}, {"ft1", only("B"), {"P"}}, {"ft2", only("B"), {"P"}}};
  p = build_partition(test, some);
  EXPECT_EQ(p.easy, (std::set<std::string>{"A", "B"}));
  EXPECT_EQ(p.hard, (std::set<std::string>{"C"}));
  EXPECT_EQ(p.provenance["A"], (std::vector<std::string>{"nb"}));
  EXPECT_EQ(p.provenance["B"], (std::vector<std::string>{"ft1", "ft2"}));

  std::vector<NamedPredictor> partial{{"nb", wrong, {"Q"}}};
  EXPECT_THROW(build_partition(test, partial), PartitionError);
}

TEST(Partition, IsPartitionAndMonotone) {
  std::mt19937_64 rng(17);
  auto v = make_vocabulary({"s", "o0", "o1", "o2"});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Fact> test;
    for (int i = 0; i < 30; ++i)
      test.push_back(make_fact(v, "P", "s", "o" + std::to_string(rng() % 3), "u" + std::to_string(i)));
    std::vector<NamedPredictor> predictors;
    for (int k = 0; k < 4; ++k) {
      auto table = std::make_shared<std::map<std::string, TokenId>>();
      for (const auto& f : test) (*table)[f.uid] = v.id("o" + std::to_string(rng() % 3));
      predictors.push_back({"p" + std::to_string(k), [table](const Fact& f) { return table->at(f.uid); }, {"P"}});
    }
    auto three = build_partition(test, std::span<const NamedPredictor>(predictors.data(), 3));
    auto four = build_partition(test, predictors);
    for (const auto* p : {&three, &four}) {
      EXPECT_EQ(p->easy.size() + p->hard.size(), test.size());
      for (const auto& uid : p->easy) EXPECT_FALSE(p->hard.count(uid));
    }
    EXPECT_TRUE(std::includes(four.easy.begin(), four.easy.end(), three.easy.begin(), three.easy.end()));
    EXPECT_TRUE(std::includes(three.hard.begin(), three.hard.end(), four.hard.begin(), four.hard.end()));
  }
}

TEST(Partition, ModelPredictorsAndRecordDumps) {
  auto v = make_vocabulary({"a", "b", "x", "y"});
  std::vector<Fact> train{make_fact(v, "P", "a", "x", "t1"), make_fact(v, "P", "b", "y", "t2"),
                          make_fact(v, "P", "b", "y", "t3")};
  std::vector<Fact> test{make_fact(v, "P", "a", "x", "A"), make_fact(v, "P", "a", "y", "B"),
                         make_fact(v, "P", "b", "x", "C")};
  auto nb = fit_naive_bayes(RelationDataset("P", Category::ManyToOne, train, {}, {}), v);
  ASSERT_EQ(predict_naive_bayes(nb, test[0]), v.id("x"));  // A is easy through NB
  ASSERT_EQ(predict_naive_bayes(nb, test[1]), v.id("x"));
  ASSERT_EQ(predict_naive_bayes(nb, test[2]), v.id("y"));

  std::vector<double> bias(v.size(), 0.0);
  bias[static_cast<std::size_t>(v.id("y"))] = 1.0;
  FineTunedPredictor always_y{{{"P", std::make_shared<const Model>(bias_only_model(v, bias))}},
                              {{"P", parse_manual_template("P", "[X] [MASK]", v)}},
                              v.content_ids()};
  FineTunedPredictor also_y = always_y;
  auto p = build_partition(test, nb, always_y, also_y);
  EXPECT_EQ(p.easy, (std::set<std::string>{"A", "B"}));
  EXPECT_EQ(p.provenance["A"], (std::vector<std::string>{"naive-bayes"}));
  EXPECT_EQ(p.provenance["B"], (std::vector<std::string>{"finetune-random-embeddings", "finetune-random-model"}));

  std::map<std::string, std::vector<PredictionRecord>> dumps;
  for (const auto& f : test) {
    dumps["naive-bayes"].push_back(make_record(f, predict_naive_bayes(nb, f), kNoToken));
    dumps["finetune"].push_back(make_record(f, v.id("y"), kNoToken));
  }
  auto q = build_partition(test, dumps);
  EXPECT_EQ(q.easy, p.easy);
  EXPECT_EQ(q.hard, p.hard);
  dumps["finetune"].pop_back();
  EXPECT_THROW(build_partition(test, dumps), PartitionError);
}

TEST(Report, EmptyIsHeaderOnly) {
  auto tsv = emit_report({}, nullptr, ReportFormat::Tsv);
  EXPECT_EQ(tsv, "relation\ttype\tname\tcount\n");
  EXPECT_EQ(count_lines(emit_report({}, nullptr, ReportFormat::Markdown)), 2u);
}

TEST(Report, RowsAndAggregates) {
  auto fx = make_skewed();
  std::vector<MethodReport> methods{{"m", evaluate(fx.records, fx.corpus), fx.records}};
  auto tsv = emit_report(methods, nullptr, ReportFormat::Tsv);
  EXPECT_EQ(tsv,
            "relation\ttype\tname\tcount\tm\n"
            "large\t1-1\tlarge\t1000\t50.0\n"
            "small\t1-1\tsmall\t10\t100.0\n"
            "All\t-\t-\t1010\t75.0\n"
            "All (micro)\t-\t-\t1010\t50.5\n");
  EXPECT_EQ(tsv, emit_report(methods, nullptr, ReportFormat::Tsv));

  Partition partition;
  for (const auto& r : fx.records) (r.correct ? partition.easy : partition.hard).insert(r.fact.uid);
  auto with = emit_report(methods, &partition, ReportFormat::Tsv);
  EXPECT_NE(with.find("m easy\tm hard"), std::string::npos);
  EXPECT_NE(with.find("large\t1-1\tlarge\t1000\t50.0\t100.0\t0.0"), std::string::npos) << with;
}

TEST(Report, PlantedFixtureGolden) {
  auto fx = make_planted(0);
  Corpus corpus;
  corpus.vocabulary = fx.vocabulary;
  corpus.relations.emplace("P_planted", fx.dataset);
  corpus.info["P_planted"] = {"P_planted", "planted", "", Category::ManyToOne};
  const auto& content = fx.vocabulary.content_ids();
  auto prior = fit_class_prior(fx.dataset);
  const TokenId majority = prior.at("P_planted").majority;
  auto init = dense_random("P_planted", 2, fx.model, 1);
  init.layout = fx.golden.layout;

  std::vector<MethodReport> methods;
  auto add = [&](const std::string& name, auto&& predict) {
    std::vector<PredictionRecord> records;
    for (const auto& f : fx.dataset.test()) records.push_back(make_record(f, predict(f), majority, &fx.vocabulary));
    methods.push_back({name, evaluate(records, corpus), records});
  };
  add("golden", [&](const Fact& f) { return predict_top1(fx.model, fx.golden, f, content, majority).predicted; });
  add("random-init", [&](const Fact& f) { return predict_top1(fx.model, init, f, content, majority).predicted; });
  add("class-prior", [&](const Fact& f) { return predict_class_prior(prior, f); });

  const std::string actual = emit_report(methods, nullptr, ReportFormat::Markdown) + "\n" +
                             emit_decomposition(methods[0].report, ReportFormat::Markdown);
  const fs::path golden = fs::path(OPTIPROBE_GOLDEN_DIR) / "planted_report.md";
  const std::string expected = read_file(golden);
  if (actual != expected) {
    auto out = fs::temp_directory_path() / "planted_report.actual.md";
    std::ofstream(out) << actual;
    FAIL() << "report differs from " << golden << "; actual written to " << out;
  }
}

TEST(Io, PredictionsAndPartitionRoundTrip) {
  auto dir = scratch_dir("eval-io");
  auto fx = make_skewed();
  write_predictions(dir / "p.jsonl", fx.records);
  auto back = read_predictions(dir / "p.jsonl");
  ASSERT_EQ(back.size(), fx.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].fact.uid, fx.records[i].fact.uid);
    EXPECT_EQ(back[i].fact.object_id, fx.records[i].fact.object_id);
    EXPECT_EQ(back[i].predicted, fx.records[i].predicted);
    EXPECT_EQ(back[i].correct, fx.records[i].correct);
    EXPECT_EQ(back[i].is_train_majority, fx.records[i].is_train_majority);
  }
  auto report = evaluate(back, fx.corpus);
  EXPECT_EQ(report.relation_mean_accuracy, Rational(3, 4));

  Partition p;
  p.easy = {"a", "b"};
  p.hard = {"c"};
  p.provenance = {{"a", {"naive-bayes"}}, {"b", {"finetune-random-model", "naive-bayes"}}};
  write_partition(dir / "part.jsonl", p);
  auto q = read_partition(dir / "part.jsonl");
  EXPECT_EQ(q.easy, p.easy);
  EXPECT_EQ(q.hard, p.hard);
  EXPECT_EQ(q.provenance, p.provenance);
}

TEST(SeenObjects, TrainObjectsAscending) {
  auto v = make_vocabulary({"s", "x", "y", "z"});
  RelationDataset d("P", Category::ManyToOne,
                    {make_fact(v, "P", "s", "z", "1"), make_fact(v, "P", "s", "x", "2"), make_fact(v, "P", "s", "z", "3")},
                    {}, {make_fact(v, "P", "s", "y", "4")}, true);
  EXPECT_EQ(seen_objects(d), (std::vector<TokenId>{v.id("x"), v.id("z")}));
}
