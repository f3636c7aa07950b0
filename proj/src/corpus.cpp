#include "optiprobe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "optiprobe/error.hpp"

namespace optiprobe {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, Reserved reserved)
    : tokens_(std::move(tokens)), reserved_(std::move(reserved)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw VocabularyError("duplicate token '" + tokens_[i] + "' at id " + std::to_string(i));
  }
  auto mask = find(reserved_.mask);
  if (!mask) throw VocabularyError("vocabulary has no mask token '" + reserved_.mask + "'");
  mask_id_ = *mask;
  pad_id_ = find(reserved_.pad);
  subject_id_ = find(reserved_.subject);
  unk_id_ = find(reserved_.unk);
  special_ids_.insert(mask_id_);
  if (pad_id_) special_ids_.insert(*pad_id_);
  if (subject_id_) special_ids_.insert(*subject_id_);
  for (TokenId id = 0; id < static_cast<TokenId>(tokens_.size()); ++id)
    if (!is_special(id)) content_ids_.push_back(id);
  if (content_ids_.empty()) throw VocabularyError("vocabulary has no content tokens");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  Reserved reserved;
  std::vector<std::string> tokens;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header && !line.empty() && line[0] == '#') {
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string role = trim(std::string_view(line).substr(1, colon - 1));
      std::string value = trim(std::string_view(line).substr(colon + 1));
      if (role == "mask") reserved.mask = value;
      else if (role == "pad") reserved.pad = value;
      else if (role == "subject") reserved.subject = value;
      else if (role == "unk") reserved.unk = value;
      continue;
    }
    header = false;
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens), std::move(reserved));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << "# mask: " << reserved_.mask << "\n# pad: " << reserved_.pad << "\n# subject: " << reserved_.subject
      << "\n# unk: " << reserved_.unk << "\n";
  for (const auto& t : tokens_) out << t << "\n";
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw VocabularyError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw VocabularyError("unknown token '" + std::string(token) + "'");
  return *found;
}

std::vector<std::string> split_pieces(std::string_view text) {
  std::vector<std::string> pieces;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) pieces.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      pieces.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return pieces;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& piece : split_pieces(text)) {
    if (auto id = find(piece)) {
      ids.push_back(*id);
    } else if (unk_id_) {
      ids.push_back(*unk_id_);
    } else {
      throw VocabularyError("out-of-vocabulary piece '" + piece + "' and no unk token");
    }
  }
  return ids;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

LoadResult load_jsonl(const std::filesystem::path& path, const Vocabulary& vocabulary, Split split,
                      std::string_view relation) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("sub_label") || !record.contains("obj_label") ||
        !record["sub_label"].is_string() || !record["obj_label"].is_string())
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected string sub_label and obj_label");

    Fact fact;
    fact.subject = record["sub_label"].get<std::string>();
    fact.object = trim(record["obj_label"].get<std::string>());
    fact.relation = record.contains("predicate_id") && record["predicate_id"].is_string()
                        ? record["predicate_id"].get<std::string>()
                        : std::string(relation);
    fact.uid = record.contains("uuid") && record["uuid"].is_string()
                   ? record["uuid"].get<std::string>()
                   : fact.relation + ":" + to_string(split) + ":" + std::to_string(line_no);

    auto pieces = split_pieces(fact.object);
    auto object_id = pieces.size() == 1 ? vocabulary.find(pieces.front()) : std::nullopt;
    if (!object_id || vocabulary.is_special(*object_id)) {
      ++result.skipped_multi_token;
      continue;
    }
    fact.object_id = *object_id;

    for (const auto& piece : split_pieces(fact.subject)) {
      auto id = vocabulary.find(piece);
      if (!id) id = vocabulary.unk_id();
      if (id && !vocabulary.is_special(*id)) fact.subject_tokens.push_back(*id);
    }
    if (fact.subject_tokens.empty()) {
      ++result.skipped_subject;
      continue;
    }
    result.facts.push_back(std::move(fact));
  }
  return result;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Fact>& facts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& f : facts) {
    json record = {{"sub_label", f.subject}, {"obj_label", f.object}, {"predicate_id", f.relation}, {"uuid", f.uid}};
    out << record.dump() << "\n";
  }
}

const char* to_string(Category category) {
  switch (category) {
    case Category::OneToOne: return "1-1";
    case Category::ManyToOne: return "N-1";
    case Category::ManyToMany: return "N-M";
  }
  return "?";
}

Category parse_category(std::string_view text) {
  if (text == "1-1") return Category::OneToOne;
  if (text == "N-1") return Category::ManyToOne;
  if (text == "N-M") return Category::ManyToMany;
  throw ParseError("unknown relation category '" + std::string(text) + "'");
}

OverlapReport check_overlap(const RelationDataset& dataset) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto* split : {&dataset.train(), &dataset.dev()})
    for (const auto& f : *split) seen.emplace(f.subject, f.object);
  std::set<std::pair<std::string, std::string>> shared;
  for (const auto& f : dataset.test())
    if (seen.count({f.subject, f.object})) shared.emplace(f.subject, f.object);
  return {shared.size(), {shared.begin(), shared.end()}};
}

RelationDataset::RelationDataset(std::string relation, Category category, std::vector<Fact> train,
                                 std::vector<Fact> dev, std::vector<Fact> test, bool allow_overlap)
    : relation_(std::move(relation)),
      category_(category),
      train_(std::move(train)),
      dev_(std::move(dev)),
      test_(std::move(test)) {
  for (const auto* split : {&train_, &dev_, &test_})
    for (const auto& f : *split)
      if (f.relation != relation_)
        throw ArgumentError("fact " + f.uid + " has relation " + f.relation + ", dataset is " + relation_);
  if (!allow_overlap) {
    auto report = check_overlap(*this);
    if (report.count > 0)
      throw OverlapError(relation_ + ": " + std::to_string(report.count) +
                         " subject-object pairs shared between train/dev and test, first (" +
                         report.offenders.front().first + ", " + report.offenders.front().second + ")");
  }
}

std::pair<std::vector<Fact>, std::vector<Fact>> split_train_dev(const std::vector<Fact>& facts, double dev_fraction,
                                                                std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ArgumentError("dev_fraction must lie in (0, 1), got " + std::to_string(dev_fraction));
  if (facts.empty()) throw ArgumentError("cannot split an empty fact list");
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto dev_size = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(facts.size())));
  std::vector<std::size_t> dev_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_size));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(dev_size), order.end());
  std::sort(dev_idx.begin(), dev_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::pair<std::vector<Fact>, std::vector<Fact>> out;
  for (auto i : train_idx) out.first.push_back(facts[i]);
  for (auto i : dev_idx) out.second.push_back(facts[i]);
  return out;
}

std::map<std::string, RelationInfo> load_relation_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read relation metadata " + path.string());
  std::map<std::string, RelationInfo> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto record = json::parse(line);
      RelationInfo info;
      info.relation = record.at("relation").get<std::string>();
      info.template_text = record.value("template", std::string());
      info.name = record.value("label", info.relation);
      info.category = parse_category(record.value("category", std::string("N-M")));
      out[info.relation] = std::move(info);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

const RelationDataset& Corpus::at(const std::string& relation) const {
  auto it = relations.find(relation);
  if (it == relations.end()) throw LookupError("unknown relation " + relation);
  return it->second;
}

const RelationInfo& Corpus::info_for(const std::string& relation) const {
  auto it = info.find(relation);
  if (it == info.end()) throw LookupError("no metadata for relation " + relation);
  return it->second;
}

Corpus load_corpus(const CorpusLoadOptions& options, Vocabulary vocabulary, std::map<std::string, RelationInfo> info,
                   CorpusLoadSummary* summary) {
  namespace fs = std::filesystem;
  std::vector<std::string> relations = options.relations;
  if (relations.empty()) {
    if (!fs::is_directory(options.data_dir)) throw IoError("not a directory: " + options.data_dir.string());
    for (const auto& entry : fs::directory_iterator(options.data_dir))
      if (entry.is_directory()) relations.push_back(entry.path().filename().string());
    std::sort(relations.begin(), relations.end());
  }

  Corpus corpus;
  for (const auto& relation : relations) {
    auto dir = options.data_dir / relation;
    CorpusLoadSummary::Entry entry;
    entry.relation = relation;
    auto train = load_jsonl(dir / options.train_file, vocabulary, Split::Train, relation);
    auto test = load_jsonl(dir / options.test_file, vocabulary, Split::Test, relation);
    std::vector<Fact> dev;
    std::vector<Fact> train_facts;
    entry.skipped_multi_token = train.skipped_multi_token + test.skipped_multi_token;
    entry.skipped_subject = train.skipped_subject + test.skipped_subject;
    if (fs::exists(dir / options.dev_file)) {
      auto loaded = load_jsonl(dir / options.dev_file, vocabulary, Split::Dev, relation);
      entry.skipped_multi_token += loaded.skipped_multi_token;
      entry.skipped_subject += loaded.skipped_subject;
      dev = std::move(loaded.facts);
      train_facts = std::move(train.facts);
    } else if (train.facts.size() >= 2) {
      std::tie(train_facts, dev) = split_train_dev(train.facts, options.dev_fraction, options.seed);
      entry.dev_from_split = true;
    } else {
      train_facts = std::move(train.facts);
    }
    entry.train = train_facts.size();
    entry.dev = dev.size();
    entry.test = test.facts.size();

    auto& meta = info[relation];
    if (meta.relation.empty()) {
      meta.relation = relation;
      meta.name = relation;
    }
    corpus.relations.emplace(relation, RelationDataset(relation, meta.category, std::move(train_facts), std::move(dev),
                                                       std::move(test.facts), options.allow_overlap));
    if (summary) summary->entries.push_back(entry);
  }
  for (auto it = info.begin(); it != info.end();) {
    if (!corpus.relations.count(it->first)) it = info.erase(it);
    else ++it;
  }
  corpus.vocabulary = std::move(vocabulary);
  corpus.info = std::move(info);
  return corpus;
}

}  // namespace optiprobe
