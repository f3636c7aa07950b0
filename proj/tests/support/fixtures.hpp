#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "optiprobe/baselines.hpp"
#include "optiprobe/corpus.hpp"
#include "optiprobe/eval.hpp"
#include "optiprobe/mlm.hpp"
#include "optiprobe/optimize.hpp"
#include "optiprobe/prompts.hpp"

namespace optiprobe::testing {

// [MASK]=0, [PAD]=1, [X]=2, [UNK]=3, then `content` in order.
Vocabulary make_vocabulary(const std::vector<std::string>& content);

Fact make_fact(const Vocabulary& vocabulary, const std::string& relation, const std::string& subject,
               const std::string& object, const std::string& uid);

ModelConfig small_config(const Vocabulary& vocabulary, int dim, int layers, int heads = 2);

// Adds N(0, scale) noise to every tensor so gradients leave the linear regime.
void perturb(Model& model, double scale, std::uint64_t seed);

/// Hand-built encoder for which a two-vector dense prompt reaches full
/// accuracy while the bare mask position points at a distractor token.
///
/// Every token embedding is [u, -u] for some u in R^(n+1) (n objects plus one
/// distractor axis K), so layer norms act as pure rescalings. Attention is
/// uniform (zero query/key weights) with identity value/output maps, and the
/// feed-forward path is zero. Subject s embeds as e_f(s); object o as 4 e_o;
/// the distractor token as 4 e_K; the mask as 1.5 c e_K with c the attention
/// share of one position. The prompt v1 = v2 = -e_K cancels the distractor.
struct PlantedFixture {
  Vocabulary vocabulary;
  Model model;
  RelationDataset dataset;
  DensePrompt golden;
  TokenId distractor = kNoToken;
};
PlantedFixture make_planted(std::uint64_t seed, int objects = 6, int train = 160, int dev = 40, int test = 100);

/// Two relations for the control experiments:
///   R_major: unrelated single-token subjects, 80% share one object;
///   R_cue:   "cueK nameJ" subjects, the cue fixes the object 90% of the time;
///            cue0 covers half the subjects.
struct ControlFixture {
  Corpus corpus;
  std::map<std::string, ManualTemplate> templates;
};
ControlFixture make_control(std::uint64_t seed);
inline const std::string kMajorRelation = "R_major";
inline const std::string kCueRelation = "R_cue";

/// Random micro-corpus: content vocabulary of at most 8 tokens ([UNK] included), at most 6
/// objects, at most 20 training facts.
struct MicroCorpus {
  Vocabulary vocabulary;
  RelationDataset dataset;
};
MicroCorpus make_micro_corpus(std::mt19937_64& rng);

/// Two relations, 10 and 1000 test facts, with accuracies 1.0 and 0.5.
struct SkewedFixture {
  Corpus corpus;
  std::vector<PredictionRecord> records;
};
SkewedFixture make_skewed();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

// Writes a corpus to <root>/corpus plus vocab.txt and relations.jsonl.
void write_corpus(const Corpus& corpus, const std::map<std::string, ManualTemplate>& templates,
                  const std::filesystem::path& root);

}  // namespace optiprobe::testing
