#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace optiprobe {

using TokenId = std::int32_t;
inline constexpr TokenId kNoToken = -1;

// Token inventory shared by the baselines, the model and the prompts.
//
// File layout: one token per line, the first token line has id 0. A leading
// block of lines starting with '#' declares reserved tokens, e.g.
//
//   # mask: [MASK]
//   # pad: [PAD]
//   # subject: [X]
//   # unk: [UNK]
//
// Undeclared roles fall back to those default spellings when present. Only the
// mask token is mandatory. mask/pad/subject are special (never predicted, never
// part of a subject); unk is an ordinary content token.
struct ReservedTokens {
  std::string mask = "[MASK]";
  std::string pad = "[PAD]";
  std::string subject = "[X]";
  std::string unk = "[UNK]";
};

class Vocabulary {
 public:
  using Reserved = ReservedTokens;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens, Reserved reserved = {});

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<TokenId> find(std::string_view token) const;
  // Throws VocabularyError for unknown tokens.
  TokenId id(std::string_view token) const;

  TokenId mask_id() const { return mask_id_; }
  std::optional<TokenId> pad_id() const { return pad_id_; }
  std::optional<TokenId> subject_id() const { return subject_id_; }
  std::optional<TokenId> unk_id() const { return unk_id_; }
  const std::set<TokenId>& special_ids() const { return special_ids_; }
  bool is_special(TokenId id) const { return special_ids_.count(id) != 0; }
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
  // Ascending ids of every non-special token.
  const std::vector<TokenId>& content_ids() const { return content_ids_; }
  const Reserved& reserved() const { return reserved_; }

  // Whitespace split, then every ASCII punctuation character becomes its own
  // piece. Out-of-vocabulary pieces map to unk; without an unk token they
  // raise VocabularyError.
  std::vector<TokenId> tokenize(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  Reserved reserved_;
  TokenId mask_id_ = kNoToken;
  std::optional<TokenId> pad_id_, subject_id_, unk_id_;
  std::set<TokenId> special_ids_;
  std::vector<TokenId> content_ids_;
};

// Splits text into surface pieces without consulting a vocabulary.
std::vector<std::string> split_pieces(std::string_view text);

enum class Split { Train, Dev, Test };
const char* to_string(Split split);

struct Fact {
  std::string subject;
  std::string relation;
  std::string object;
  TokenId object_id = kNoToken;
  std::vector<TokenId> subject_tokens;
  // Stable identifier; the source "uuid" field when present, otherwise
  // "<relation>:<split>:<line>".
  std::string uid;
};

struct LoadResult {
  std::vector<Fact> facts;
  // Lines whose object is not exactly one content token.
  std::size_t skipped_multi_token = 0;
  // Lines whose subject yields no usable content token.
  std::size_t skipped_subject = 0;
  std::size_t skipped() const { return skipped_multi_token + skipped_subject; }
};

// Reads LAMA-style JSONL (sub_label, obj_label, optional predicate_id).
// Facts without predicate_id take `relation`.
LoadResult load_jsonl(const std::filesystem::path& path, const Vocabulary& vocabulary, Split split,
                      std::string_view relation = {});
void write_jsonl(const std::filesystem::path& path, const std::vector<Fact>& facts);

enum class Category { OneToOne, ManyToOne, ManyToMany };
const char* to_string(Category category);
Category parse_category(std::string_view text);

struct OverlapReport {
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::string>> offenders;  // (subject, object), sorted
};

class RelationDataset;
OverlapReport check_overlap(const RelationDataset& dataset);

class RelationDataset {
 public:
  RelationDataset() = default;
  // Throws OverlapError when train/dev share a (subject, object) pair with test
  // and `allow_overlap` is false; ArgumentError on mixed relation ids.
  RelationDataset(std::string relation, Category category, std::vector<Fact> train, std::vector<Fact> dev,
                  std::vector<Fact> test, bool allow_overlap = false);

  const std::string& relation() const { return relation_; }
  Category category() const { return category_; }
  const std::vector<Fact>& train() const { return train_; }
  const std::vector<Fact>& dev() const { return dev_; }
  const std::vector<Fact>& test() const { return test_; }

 private:
  std::string relation_;
  Category category_ = Category::ManyToMany;
  std::vector<Fact> train_, dev_, test_;
};

// Deterministic partition; |dev| = round(dev_fraction * |facts|). Each side keeps
// the input order.
std::pair<std::vector<Fact>, std::vector<Fact>> split_train_dev(const std::vector<Fact>& facts, double dev_fraction,
                                                                std::uint64_t seed);

struct RelationInfo {
  std::string relation;
  std::string name;
  std::string template_text;
  Category category = Category::ManyToMany;
};

// JSONL with fields relation, template, category and optional label.
std::map<std::string, RelationInfo> load_relation_metadata(const std::filesystem::path& path);

struct Corpus {
  Vocabulary vocabulary;
  std::map<std::string, RelationDataset> relations;
  std::map<std::string, RelationInfo> info;

  const RelationDataset& at(const std::string& relation) const;
  const RelationInfo& info_for(const std::string& relation) const;
};

struct CorpusLoadOptions {
  std::filesystem::path data_dir;
  std::vector<std::string> relations;  // empty: every subdirectory of data_dir
  std::string train_file = "train.jsonl";
  std::string dev_file = "dev.jsonl";
  std::string test_file = "test.jsonl";
  double dev_fraction = 0.2;  // used when the dev file is absent
  std::uint64_t seed = 0;
  bool allow_overlap = false;
};

struct CorpusLoadSummary {
  struct Entry {
    std::string relation;
    std::size_t train = 0, dev = 0, test = 0;
    std::size_t skipped_multi_token = 0, skipped_subject = 0;
    bool dev_from_split = false;
  };
  std::vector<Entry> entries;
};

// Layout: <data_dir>/<relation>/{train,dev,test}.jsonl
Corpus load_corpus(const CorpusLoadOptions& options, Vocabulary vocabulary,
                   std::map<std::string, RelationInfo> info = {}, CorpusLoadSummary* summary = nullptr);

}  // namespace optiprobe
