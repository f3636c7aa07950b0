#include "fixtures.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace optiprobe::testing {

namespace fs = std::filesystem;

Vocabulary make_vocabulary(const std::vector<std::string>& content) {
  std::vector<std::string> tokens{"[MASK]", "[PAD]", "[X]", "[UNK]"};
  tokens.insert(tokens.end(), content.begin(), content.end());
  return Vocabulary(tokens);
}

Fact make_fact(const Vocabulary& vocabulary, const std::string& relation, const std::string& subject,
               const std::string& object, const std::string& uid) {
  Fact f;
  f.subject = subject;
  f.relation = relation;
  f.object = object;
  f.object_id = vocabulary.id(object);
  f.subject_tokens = vocabulary.tokenize(subject);
  f.uid = uid;
  return f;
}

ModelConfig small_config(const Vocabulary& vocabulary, int dim, int layers, int heads) {
  ModelConfig c;
  c.embed_dim = dim;
  c.num_layers = layers;
  c.num_heads = heads;
  c.ffn_dim = 2 * dim;
  c.max_seq_len = 16;
  c.vocab_size = static_cast<int>(vocabulary.size());
  c.mask_id = vocabulary.mask_id();
  return c;
}

void perturb(Model& model, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, scale);
  model.params.for_each([&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += noise(rng);
  });
}

PlantedFixture make_planted(std::uint64_t seed, int objects, int train, int dev, int test) {
  const int n = objects;
  const int half = n + 1;  // object axes plus the distractor axis K = n
  const int d = 2 * half;
  const int subjects = train + dev + test;

  std::vector<std::string> content;
  for (int o = 0; o < n; ++o) content.push_back("obj" + std::to_string(o));
  content.push_back("distractor");
  for (int s = 0; s < subjects; ++s) content.push_back("subj" + std::to_string(s));
  auto vocabulary = make_vocabulary(content);

  ModelConfig config;
  config.embed_dim = d;
  config.num_layers = 1;
  config.num_heads = 2;
  config.ffn_dim = 4;
  config.max_seq_len = 8;
  config.vocab_size = static_cast<int>(vocabulary.size());
  config.mask_id = vocabulary.mask_id();
  Model model{config, Parameters<double>::zeros(config)};
  auto& p = model.params;
  auto& b = p.blocks[0];
  b.ln1_gain.setOnes();
  b.ln2_gain.setOnes();
  p.final_gain.setOnes();
  b.wv.setIdentity();
  b.wo.setIdentity();

  auto set = [&](TokenId id, const RowVector<double>& u) {
    p.token_embeddings.row(id).head(half) = u;
    p.token_embeddings.row(id).tail(half) = -u;
  };
  auto axis = [&](int k, double scale) {
    RowVector<double> u = RowVector<double>::Zero(half);
    u(k) = scale;
    return u;
  };
  // One input position contributes sqrt(half) / L to the mask row through
  // attention; prompts here have L = 4.
  const double c = std::sqrt(static_cast<double>(half)) / 4.0;
  const double beta = 4.0;
  set(vocabulary.mask_id(), axis(n, 1.5 * c));
  for (int o = 0; o < n; ++o) set(vocabulary.id("obj" + std::to_string(o)), axis(o, beta));
  set(vocabulary.id("distractor"), axis(n, beta));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<Fact> facts;
  for (int s = 0; s < subjects; ++s) {
    const int o = pick(rng);
    const auto name = "subj" + std::to_string(s);
    set(vocabulary.id(name), axis(o, 1.0));
    facts.push_back(make_fact(vocabulary, "P_planted", name, "obj" + std::to_string(o), "planted:" + name));
  }
  std::vector<Fact> tr(facts.begin(), facts.begin() + train);
  std::vector<Fact> dv(facts.begin() + train, facts.begin() + train + dev);
  std::vector<Fact> te(facts.begin() + train + dev, facts.end());
  RelationDataset dataset("P_planted", Category::ManyToOne, std::move(tr), std::move(dv), std::move(te));

  DensePrompt golden{"P_planted", Matrix<double>::Zero(2, d),
                     {Slot::subject(), Slot::vector(0), Slot::vector(1), Slot::mask()}};
  for (int i = 0; i < 2; ++i) {
    golden.vectors(i, n) = -1.0;
    golden.vectors(i, half + n) = 1.0;
  }
  const TokenId distractor = vocabulary.id("distractor");
  return {std::move(vocabulary), std::move(model), std::move(dataset), std::move(golden), distractor};
}

ControlFixture make_control(std::uint64_t seed) {
  constexpr int kNames = 250, kMajorObjects = 5, kCueObjects = 4;
  std::vector<std::string> content{"lives", "in", "works", "for", "."};
  for (int o = 0; o < kMajorObjects; ++o) content.push_back("city" + std::to_string(o));
  for (int o = 0; o < kCueObjects; ++o) content.push_back("firm" + std::to_string(o));
  for (int k = 0; k < kCueObjects; ++k) content.push_back("cue" + std::to_string(k));
  for (int j = 0; j < kNames; ++j) content.push_back("name" + std::to_string(j));
  auto vocabulary = make_vocabulary(content);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto split = [](std::vector<Fact> facts, std::vector<Fact>& train, std::vector<Fact>& dev, std::vector<Fact>& test) {
    // 150 train, 50 dev, rest test
    train.assign(facts.begin(), facts.begin() + 150);
    dev.assign(facts.begin() + 150, facts.begin() + 200);
    test.assign(facts.begin() + 200, facts.end());
  };

  Corpus corpus;
  std::vector<Fact> major;
  for (int j = 0; j < kNames; ++j) {
    int o = 0;
    if (unit(rng) >= 0.8) o = 1 + static_cast<int>(unit(rng) * (kMajorObjects - 1));
    const auto name = "name" + std::to_string(j);
    major.push_back(make_fact(vocabulary, kMajorRelation, name, "city" + std::to_string(o), "major:" + name));
  }
  std::vector<Fact> cue;
  for (int j = 0; j < kNames; ++j) {
    // cue0 on half the subjects, the rest uniform
    const int k = unit(rng) < 0.5 ? 0 : 1 + static_cast<int>(unit(rng) * (kCueObjects - 1));
    int o = k;
    if (unit(rng) >= 0.9) o = (k + 1 + static_cast<int>(unit(rng) * (kCueObjects - 1))) % kCueObjects;
    const auto subject = "cue" + std::to_string(k) + " name" + std::to_string(j);
    cue.push_back(make_fact(vocabulary, kCueRelation, subject, "firm" + std::to_string(o), "cue:" + std::to_string(j)));
  }

  ControlFixture out;
  std::vector<Fact> tr, dv, te;
  split(major, tr, dv, te);
  corpus.relations.emplace(kMajorRelation, RelationDataset(kMajorRelation, Category::ManyToOne, tr, dv, te));
  split(cue, tr, dv, te);
  corpus.relations.emplace(kCueRelation, RelationDataset(kCueRelation, Category::ManyToOne, tr, dv, te));
  out.templates[kMajorRelation] = parse_manual_template(kMajorRelation, "[X] lives in [MASK] .", vocabulary);
  out.templates[kCueRelation] = parse_manual_template(kCueRelation, "[X] works for [MASK] .", vocabulary);
  corpus.info[kMajorRelation] = {kMajorRelation, "lives in", "[X] lives in [MASK] .", Category::ManyToOne};
  corpus.info[kCueRelation] = {kCueRelation, "works for", "[X] works for [MASK] .", Category::ManyToOne};
  corpus.vocabulary = std::move(vocabulary);
  out.corpus = std::move(corpus);
  return out;
}

MicroCorpus make_micro_corpus(std::mt19937_64& rng) {
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int content = draw(2, 7);  // plus [UNK]: at most 8 content tokens
  std::vector<std::string> tokens;
  for (int i = 0; i < content; ++i) tokens.push_back("w" + std::to_string(i));
  auto vocabulary = make_vocabulary(tokens);

  const int objects = draw(1, std::min(6, content));
  const int facts = draw(1, 20);
  std::vector<Fact> train, test;
  for (int i = 0; i < facts + 10; ++i) {
    std::string subject;
    const int length = draw(1, 3);
    for (int t = 0; t < length; ++t) subject += (t ? " w" : "w") + std::to_string(draw(0, content - 1));
    auto f = make_fact(vocabulary, "micro", subject, "w" + std::to_string(draw(0, objects - 1)),
                       "micro:" + std::to_string(i));
    (i < facts ? train : test).push_back(std::move(f));
  }
  return {std::move(vocabulary), RelationDataset("micro", Category::ManyToMany, train, {}, test, true)};
}

SkewedFixture make_skewed() {
  auto vocabulary = make_vocabulary({"a", "b", "yes", "no"});
  SkewedFixture out;
  const TokenId yes = vocabulary.id("yes"), no = vocabulary.id("no");
  auto build = [&](const std::string& relation, int size, int correct) {
    std::vector<Fact> train{make_fact(vocabulary, relation, "a", "yes", relation + ":train")};
    std::vector<Fact> test;
    for (int i = 0; i < size; ++i) {
      auto f = make_fact(vocabulary, relation, "b", "yes", relation + ":" + std::to_string(i));
      out.records.push_back(make_record(f, i < correct ? yes : no, yes, &vocabulary));
      test.push_back(std::move(f));
    }
    out.corpus.relations.emplace(relation, RelationDataset(relation, Category::OneToOne, train, {}, test));
  };
  build("small", 10, 10);
  build("large", 1000, 500);
  out.corpus.vocabulary = std::move(vocabulary);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("optiprobe-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_corpus(const Corpus& corpus, const std::map<std::string, ManualTemplate>& templates, const fs::path& root) {
  fs::create_directories(root / "corpus");
  corpus.vocabulary.save(root / "vocab.txt");
  std::ofstream meta(root / "relations.jsonl");
  for (const auto& [relation, dataset] : corpus.relations) {
    auto dir = root / "corpus" / relation;
    fs::create_directories(dir);
    write_jsonl(dir / "train.jsonl", dataset.train());
    write_jsonl(dir / "dev.jsonl", dataset.dev());
    write_jsonl(dir / "test.jsonl", dataset.test());
    nlohmann::json line = {{"relation", relation}, {"category", to_string(dataset.category())}};
    auto it = templates.find(relation);
    if (it != templates.end()) line["template"] = to_text(it->second, corpus.vocabulary);
    auto info = corpus.info.find(relation);
    if (info != corpus.info.end()) line["label"] = info->second.name;
    meta << line.dump() << "\n";
  }
}

}  // namespace optiprobe::testing
