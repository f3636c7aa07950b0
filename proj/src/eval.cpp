#include "optiprobe/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace optiprobe {

using nlohmann::json;

PredictionRecord make_record(const Fact& fact, TokenId predicted, TokenId train_majority, const Vocabulary* vocabulary) {
  PredictionRecord r;
  r.fact = fact;
  r.predicted = predicted;
  r.predicted_token = vocabulary && vocabulary->contains(predicted) ? vocabulary->token(predicted) : std::string();
  r.correct = predicted == fact.object_id;
  r.is_train_majority = predicted == train_majority;
  return r;
}

PredictionRecord predict_top1(const Model& model, const Prompt& prompt, const Fact& fact,
                              std::span<const TokenId> candidates, TokenId train_majority,
                              const Vocabulary* vocabulary) {
  if (candidates.empty()) throw ArgumentError("predict_top1: empty candidate set");
  auto logits = forward_mask_logits(model, render(prompt, fact, model).input);
  return make_record(fact, argmax_token<double>(logits, candidates), train_majority, vocabulary);
}

std::vector<TokenId> seen_objects(const RelationDataset& dataset) {
  std::set<TokenId> ids;
  for (const auto& f : dataset.train()) ids.insert(f.object_id);
  return {ids.begin(), ids.end()};
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

const RelationScore* EvalReport::find(const std::string& relation) const {
  for (const auto& r : relations)
    if (r.relation == relation) return &r;
  return nullptr;
}

EvalReport evaluate(std::span<const PredictionRecord> records, const Corpus& corpus) {
  std::map<std::string, RelationScore> scores;
  for (const auto& rec : records) {
    const auto& relation = rec.fact.relation;
    if (!corpus.relations.count(relation)) throw LookupError("prediction for unknown relation " + relation);
    auto& s = scores[relation];
    ++s.count;
    if (rec.correct) ++(rec.is_train_majority ? s.majority_correct : s.other_correct);
    if (rec.correct) ++s.correct;
    if (rec.is_train_majority) ++s.majority_predicted;
  }

  EvalReport report;
  for (const auto& [relation, dataset] : corpus.relations) {
    auto it = scores.find(relation);
    if (it == scores.end()) {
      report.warnings.push_back("relation " + relation + " has no test predictions; excluded from the mean");
      continue;
    }
    RelationScore s = it->second;
    s.relation = relation;
    auto info = corpus.info.find(relation);
    s.name = info == corpus.info.end() ? relation : info->second.name;
    s.category = dataset.category();
    report.relations.push_back(std::move(s));
  }

  std::size_t correct = 0;
  for (const auto& s : report.relations) {
    report.relation_mean_accuracy += s.accuracy();
    report.relation_mean_majority_part += s.majority_part();
    report.relation_mean_other_part += s.other_part();
    report.relation_mean_elicitation += s.elicitation_rate();
    report.total_count += s.count;
    correct += s.correct;
  }
  if (!report.relations.empty()) {
    const Rational n(static_cast<long long>(report.relations.size()));
    report.relation_mean_accuracy /= n;
    report.relation_mean_majority_part /= n;
    report.relation_mean_other_part /= n;
    report.relation_mean_elicitation /= n;
    report.micro_accuracy = Rational(correct, report.total_count);
  } else {
    report.warnings.push_back("no relation has test predictions");
  }
  return report;
}

Partition build_partition(std::span<const Fact> test, std::span<const NamedPredictor> predictors) {
  for (const auto& f : test)
    for (const auto& p : predictors)
      if (!p.relations.count(f.relation))
        throw PartitionError("predictor " + p.name + " does not cover relation " + f.relation);
  Partition out;
  for (const auto& f : test) {
    std::vector<std::string> hits;
    for (const auto& p : predictors)
      if (p.predict(f) == f.object_id) hits.push_back(p.name);
    if (hits.empty()) {
      out.hard.insert(f.uid);
    } else {
      out.easy.insert(f.uid);
      out.provenance[f.uid] = std::move(hits);
    }
  }
  return out;
}

namespace {

NamedPredictor finetuned_predictor(std::string name, const FineTunedPredictor& ft) {
  NamedPredictor p{std::move(name), nullptr, {}};
  for (const auto& [relation, model] : ft.models)
    if (ft.templates.count(relation)) p.relations.insert(relation);
  p.predict = [&ft](const Fact& f) {
    const auto& model = *ft.models.at(f.relation);
    auto logits = forward_mask_logits(model, render(ft.templates.at(f.relation), f, model).input);
    if (!ft.candidates.empty()) return argmax_token<double>(logits, ft.candidates);
    std::vector<TokenId> all;
    for (TokenId id = 0; id < model.config.vocab_size; ++id)
      if (id != model.config.mask_id) all.push_back(id);
    return argmax_token<double>(logits, all);
  };
  return p;
}

}  // namespace

Partition build_partition(std::span<const Fact> test, const NaiveBayesModel& naive_bayes,
                          const FineTunedPredictor& finetuned_random_embeddings,
                          const FineTunedPredictor& finetuned_random_model) {
  std::vector<NamedPredictor> predictors;
  NamedPredictor nb{"naive-bayes", [&naive_bayes](const Fact& f) { return predict_naive_bayes(naive_bayes, f); }, {}};
  for (const auto& [relation, _] : naive_bayes.relations) nb.relations.insert(relation);
  predictors.push_back(std::move(nb));
  predictors.push_back(finetuned_predictor("finetune-random-embeddings", finetuned_random_embeddings));
  predictors.push_back(finetuned_predictor("finetune-random-model", finetuned_random_model));
  return build_partition(test, predictors);
}

Partition build_partition(std::span<const Fact> test,
                          const std::map<std::string, std::vector<PredictionRecord>>& records) {
  std::vector<NamedPredictor> predictors;
  std::vector<std::shared_ptr<std::map<std::string, TokenId>>> tables;
  for (const auto& [name, recs] : records) {
    auto table = std::make_shared<std::map<std::string, TokenId>>();
    std::set<std::string> relations;
    for (const auto& r : recs) (*table)[r.fact.uid] = r.predicted;
    for (const auto& f : test) {
      if (!table->count(f.uid)) throw PartitionError("method " + name + " has no prediction for fact " + f.uid);
      relations.insert(f.relation);
    }
    predictors.push_back({name, [table](const Fact& f) { return table->at(f.uid); }, std::move(relations)});
  }
  return build_partition(test, predictors);
}

namespace {

std::string percent(const Rational& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * to_double(r));
  return buf;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render(ReportFormat format) const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
      if (format == ReportFormat::Tsv) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "\t" : "") << cells[i];
        os << "\n";
      } else {
        os << "|";
        for (const auto& c : cells) os << " " << c << " |";
        os << "\n";
      }
    };
    line(header_);
    if (format == ReportFormat::Markdown) {
      os << "|";
      for (std::size_t i = 0; i < header_.size(); ++i) os << (i < 4 ? " --- |" : " ---: |");
      os << "\n";
    }
    for (const auto& r : rows_) line(r);
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct SubsetScore {
  std::size_t count = 0, correct = 0;
};

}  // namespace

std::string emit_report(std::span<const MethodReport> methods, const Partition* partition, ReportFormat format) {
  std::vector<std::string> header{"relation", "type", "name", "count"};
  for (const auto& m : methods) header.push_back(m.method);
  if (partition)
    for (const auto& m : methods) {
      header.push_back(m.method + " easy");
      header.push_back(m.method + " hard");
    }
  Table table(header);
  if (methods.empty()) return table.render(format);

  // Rows follow the union of relations, in id order.
  std::map<std::string, const RelationScore*> rows;
  for (const auto& m : methods)
    for (const auto& s : m.report.relations) rows.emplace(s.relation, &s);

  // Per-method, per-relation easy/hard tallies.
  std::vector<std::map<std::string, std::pair<SubsetScore, SubsetScore>>> subsets(methods.size());
  if (partition)
    for (std::size_t i = 0; i < methods.size(); ++i)
      for (const auto& r : methods[i].records) {
        auto& [easy, hard] = subsets[i][r.fact.relation];
        auto& s = partition->is_easy(r.fact.uid) ? easy : hard;
        ++s.count;
        if (r.correct) ++s.correct;
      }

  std::size_t total = 0;
  for (const auto& [relation, score] : rows) {
    std::vector<std::string> row{relation, to_string(score->category), score->name, std::to_string(score->count)};
    total += score->count;
    for (const auto& m : methods) {
      const auto* s = m.report.find(relation);
      row.push_back(s ? percent(s->accuracy()) : "-");
    }
    if (partition)
      for (std::size_t i = 0; i < methods.size(); ++i) {
        auto it = subsets[i].find(relation);
        for (int part = 0; part < 2; ++part) {
          SubsetScore s = it == subsets[i].end() ? SubsetScore{} : (part == 0 ? it->second.first : it->second.second);
          row.push_back(s.count ? percent(Rational(s.correct, s.count)) : "-");
        }
      }
    table.add(std::move(row));
  }

  std::vector<std::string> all{"All", "-", "-", std::to_string(total)};
  std::vector<std::string> micro{"All (micro)", "-", "-", std::to_string(total)};
  for (const auto& m : methods) {
    all.push_back(percent(m.report.relation_mean_accuracy));
    micro.push_back(percent(m.report.micro_accuracy));
  }
  if (partition)
    for (std::size_t i = 0; i < methods.size(); ++i) {
      for (int part = 0; part < 2; ++part) {
        Rational mean_sum;
        std::size_t relations = 0, count = 0, correct = 0;
        for (const auto& [relation, pair] : subsets[i]) {
          const auto& s = part == 0 ? pair.first : pair.second;
          if (!s.count) continue;
          mean_sum += Rational(s.correct, s.count);
          ++relations;
          count += s.count;
          correct += s.correct;
        }
        all.push_back(relations ? percent(mean_sum / Rational(static_cast<long long>(relations))) : "-");
        micro.push_back(count ? percent(Rational(correct, count)) : "-");
      }
    }
  table.add(std::move(all));
  table.add(std::move(micro));
  return table.render(format);
}

std::string emit_decomposition(const EvalReport& report, ReportFormat format) {
  Table table({"relation", "type", "name", "count", "correct", "majority_correct", "other_correct",
               "majority_predicted", "accuracy", "majority_part", "other_part", "elicitation"});
  std::size_t count = 0, correct = 0, majority = 0, other = 0, predicted = 0;
  for (const auto& s : report.relations) {
    table.add({s.relation, to_string(s.category), s.name, std::to_string(s.count), std::to_string(s.correct),
               std::to_string(s.majority_correct), std::to_string(s.other_correct),
               std::to_string(s.majority_predicted), percent(s.accuracy()), percent(s.majority_part()),
               percent(s.other_part()), percent(s.elicitation_rate())});
    count += s.count;
    correct += s.correct;
    majority += s.majority_correct;
    other += s.other_correct;
    predicted += s.majority_predicted;
  }
  table.add({"All", "-", "-", std::to_string(count), std::to_string(correct), std::to_string(majority),
             std::to_string(other), std::to_string(predicted), percent(report.relation_mean_accuracy),
             percent(report.relation_mean_majority_part), percent(report.relation_mean_other_part),
             percent(report.relation_mean_elicitation)});
  return table.render(format);
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    json line = {{"uid", r.fact.uid},
                 {"relation", r.fact.relation},
                 {"subject", r.fact.subject},
                 {"object", r.fact.object},
                 {"object_id", r.fact.object_id},
                 {"predicted", r.predicted_token},
                 {"predicted_id", r.predicted},
                 {"correct", r.correct},
                 {"is_train_majority", r.is_train_majority}};
    out << line.dump() << "\n";
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      PredictionRecord r;
      r.fact.uid = j.at("uid").get<std::string>();
      r.fact.relation = j.at("relation").get<std::string>();
      r.fact.subject = j.at("subject").get<std::string>();
      r.fact.object = j.at("object").get<std::string>();
      r.fact.object_id = j.at("object_id").get<TokenId>();
      r.predicted_token = j.at("predicted").get<std::string>();
      r.predicted = j.at("predicted_id").get<TokenId>();
      r.correct = j.at("correct").get<bool>();
      r.is_train_majority = j.at("is_train_majority").get<bool>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_partition(const std::filesystem::path& path, const Partition& partition) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::set<std::string> all(partition.easy);
  all.insert(partition.hard.begin(), partition.hard.end());
  for (const auto& uid : all) {
    bool easy = partition.is_easy(uid);
    json line = {{"uid", uid}, {"easy", easy}, {"provenance", json::array()}};
    if (easy) line["provenance"] = partition.provenance.at(uid);
    out << line.dump() << "\n";
  }
}

Partition read_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Partition p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      auto uid = j.at("uid").get<std::string>();
      if (j.at("easy").get<bool>()) {
        p.easy.insert(uid);
        p.provenance[uid] = j.at("provenance").get<std::vector<std::string>>();
      } else {
        p.hard.insert(uid);
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return p;
}

}  // namespace optiprobe
