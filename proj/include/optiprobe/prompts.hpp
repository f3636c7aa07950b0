#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "optiprobe/corpus.hpp"
#include "optiprobe/mlm.hpp"

namespace optiprobe {

enum class SlotKind { Subject, Mask, Token, Vector };

// One position group of a template. Token slots carry a vocabulary id, vector
// slots the index of a dense prompt vector.
struct Slot {
  SlotKind kind = SlotKind::Token;
  int index = 0;

  static Slot subject() { return {SlotKind::Subject, 0}; }
  static Slot mask() { return {SlotKind::Mask, 0}; }
  static Slot token(TokenId id) { return {SlotKind::Token, id}; }
  static Slot vector(int i) { return {SlotKind::Vector, i}; }
  bool operator==(const Slot&) const = default;
};

/// Human-written cloze pattern, e.g. "[X] was born in [MASK] ."
struct ManualTemplate {
  std::string relation;
  std::vector<Slot> layout;  // Subject, Mask and Token slots only
};

/// [X] [T]1 ... [T]m [MASK]
struct TriggerTemplate {
  std::string relation;
  std::vector<TokenId> triggers;

  std::vector<Slot> layout() const;
};

/// Free input-space vectors placed around the subject and the mask.
template <typename Scalar>
struct DenseTemplate {
  std::string relation;
  Matrix<Scalar> vectors;  // m x d
  std::vector<Slot> layout;

  Eigen::Index size() const { return vectors.rows(); }
};

using DensePrompt = DenseTemplate<double>;
using Prompt = std::variant<ManualTemplate, TriggerTemplate, DensePrompt>;

const std::string& relation_of(const Prompt& prompt);

template <typename Scalar>
struct RenderedPrompt {
  EncodedInput<Scalar> input;
  std::vector<Eigen::Index> vector_slot_positions;  // position of vector i
};

// "[X]" and "[MASK]" are recognised verbatim; every other piece must be a
// vocabulary token. Throws VocabularyError / ParseError.
ManualTemplate parse_manual_template(const std::string& relation, std::string_view text, const Vocabulary& vocabulary);
std::string to_text(const ManualTemplate& manual, const Vocabulary& vocabulary);

void validate(const ManualTemplate& manual);
void validate(const TriggerTemplate& trigger, const Vocabulary& vocabulary);
template <typename Scalar>
void validate(const DenseTemplate<Scalar>& dense, Eigen::Index dim);

namespace detail {

inline void check_layout(const std::vector<Slot>& layout, Eigen::Index vector_count, const std::string& relation) {
  int subjects = 0, masks = 0;
  std::vector<int> seen(static_cast<std::size_t>(vector_count), 0);
  for (const auto& s : layout) {
    if (s.kind == SlotKind::Subject) ++subjects;
    if (s.kind == SlotKind::Mask) ++masks;
    if (s.kind == SlotKind::Vector) {
      if (s.index < 0 || s.index >= vector_count)
        throw ArgumentError(relation + ": vector slot " + std::to_string(s.index) + " out of range");
      ++seen[static_cast<std::size_t>(s.index)];
    }
  }
  if (subjects != 1 || masks != 1)
    throw ArgumentError(relation + ": template needs exactly one [X] and one [MASK]");
  for (int count : seen)
    if (count != 1) throw ArgumentError(relation + ": every dense vector must appear exactly once");
}

template <typename Scalar>
RenderedPrompt<Scalar> render_layout(const std::vector<Slot>& layout, const Matrix<Scalar>* vectors, const Fact& fact,
                                     const MlmModel<Scalar>& model) {
  Eigen::Index length = 0;
  for (const auto& s : layout)
    length += s.kind == SlotKind::Subject ? static_cast<Eigen::Index>(fact.subject_tokens.size()) : 1;
  if (length > model.config.max_seq_len)
    throw RenderError("fact " + fact.uid + " (" + fact.subject + "): rendered length " + std::to_string(length) +
                      " exceeds max_seq_len " + std::to_string(model.config.max_seq_len));

  RenderedPrompt<Scalar> out;
  out.input.vectors.resize(length, model.dim());
  out.input.token_ids.assign(static_cast<std::size_t>(length), kNoToken);
  if (vectors) out.vector_slot_positions.assign(static_cast<std::size_t>(vectors->rows()), -1);
  auto put_token = [&](Eigen::Index pos, TokenId id) {
    if (id < 0 || id >= model.config.vocab_size)
      throw RenderError("fact " + fact.uid + ": token id " + std::to_string(id) + " outside the model vocabulary");
    out.input.vectors.row(pos) = model.params.token_embeddings.row(id);
    out.input.token_ids[static_cast<std::size_t>(pos)] = id;
  };
  Eigen::Index pos = 0;
  for (const auto& s : layout) {
    switch (s.kind) {
      case SlotKind::Subject:
        for (TokenId id : fact.subject_tokens) put_token(pos++, id);
        break;
      case SlotKind::Mask:
        out.input.mask_position = pos;
        put_token(pos++, model.config.mask_id);
        break;
      case SlotKind::Token:
        put_token(pos++, s.index);
        break;
      case SlotKind::Vector:
        out.input.vectors.row(pos) = vectors->row(s.index);
        out.vector_slot_positions[static_cast<std::size_t>(s.index)] = pos;
        ++pos;
        break;
    }
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
void validate(const DenseTemplate<Scalar>& dense, Eigen::Index dim) {
  if (dense.size() > 0 && dense.vectors.cols() != dim)
    throw ArgumentError(dense.relation + ": dense vectors have dimension " + std::to_string(dense.vectors.cols()) +
                        ", model has " + std::to_string(dim));
  detail::check_layout(dense.layout, dense.size(), dense.relation);
}

/// Embeds the subject tokens, template tokens and the mask token through the
/// model's token table. Dense vectors enter as-is. Positional terms are added
/// later by the model for every slot alike.
template <typename Scalar>
RenderedPrompt<Scalar> render(const ManualTemplate& manual, const Fact& fact, const MlmModel<Scalar>& model) {
  validate(manual);
  return detail::render_layout<Scalar>(manual.layout, nullptr, fact, model);
}

template <typename Scalar>
RenderedPrompt<Scalar> render(const TriggerTemplate& trigger, const Fact& fact, const MlmModel<Scalar>& model) {
  return detail::render_layout<Scalar>(trigger.layout(), nullptr, fact, model);
}

template <typename Scalar>
RenderedPrompt<Scalar> render(const DenseTemplate<Scalar>& dense, const Fact& fact, const MlmModel<Scalar>& model) {
  validate(dense, model.dim());
  return detail::render_layout<Scalar>(dense.layout, &dense.vectors, fact, model);
}

inline RenderedPrompt<double> render(const Prompt& prompt, const Fact& fact, const Model& model) {
  return std::visit([&](const auto& t) { return render(t, fact, model); }, prompt);
}

/// One vector per manual template token, initialised to that token's input
/// embedding and kept at the same position.
template <typename Scalar>
DenseTemplate<Scalar> dense_from_manual(const ManualTemplate& manual, const MlmModel<Scalar>& model) {
  validate(manual);
  DenseTemplate<Scalar> dense{manual.relation, {}, {}};
  std::vector<TokenId> ids;
  for (const auto& s : manual.layout) {
    if (s.kind == SlotKind::Token) {
      if (s.index < 0 || s.index >= model.config.vocab_size)
        throw VocabularyError(manual.relation + ": template token id " + std::to_string(s.index) +
                              " outside the model vocabulary");
      dense.layout.push_back(Slot::vector(static_cast<int>(ids.size())));
      ids.push_back(s.index);
    } else {
      dense.layout.push_back(s);
    }
  }
  dense.vectors.resize(static_cast<Eigen::Index>(ids.size()), model.dim());
  for (std::size_t i = 0; i < ids.size(); ++i)
    dense.vectors.row(static_cast<Eigen::Index>(i)) = model.params.token_embeddings.row(ids[i]);
  return dense;
}

/// [X] [V]1 ... [V]m [MASK] with vectors ~ N(0, 0.02).
template <typename Scalar>
DenseTemplate<Scalar> dense_random(const std::string& relation, int m, const MlmModel<Scalar>& model,
                                   std::uint64_t seed) {
  if (m < 1) throw ArgumentError("dense_random: m must be >= 1");
  DenseTemplate<Scalar> dense{relation, Matrix<Scalar>(m, model.dim()), {}};
  std::mt19937_64 rng(seed);
  detail::fill_normal<Scalar>(dense.vectors, rng);
  dense.layout.push_back(Slot::subject());
  for (int i = 0; i < m; ++i) dense.layout.push_back(Slot::vector(i));
  dense.layout.push_back(Slot::mask());
  return dense;
}

// Prompt file: JSONL, one record per relation:
//   {"relation", "kind": manual|trigger|dense, "layout": ["[X]", "[T]", "[V]1", "[MASK]", ...],
//    "payload": {"tokens": [...]} or {"shape": [m, d], "dtype": "float64", "data": <base64>}}
// Records carrying only {"relation", "template": "..."} load as manual prompts.
void save_prompts(const std::filesystem::path& path, const std::vector<Prompt>& prompts, const Vocabulary& vocabulary);
std::vector<Prompt> load_prompts(const std::filesystem::path& path, const Vocabulary& vocabulary);

}  // namespace optiprobe
