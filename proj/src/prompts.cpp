#include "optiprobe/prompts.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace optiprobe {

using nlohmann::json;

namespace {

constexpr const char* kSubject = "[X]";
constexpr const char* kMask = "[MASK]";

std::string base64_encode(const std::vector<std::byte>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::byte> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ParseError("base64 payload length is not a multiple of 4");
  std::vector<std::byte> out(3 * text.size() / 4 + 1);
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

json layout_to_json(const std::vector<Slot>& layout) {
  json out = json::array();
  for (const auto& s : layout) {
    switch (s.kind) {
      case SlotKind::Subject: out.push_back(kSubject); break;
      case SlotKind::Mask: out.push_back(kMask); break;
      case SlotKind::Token: out.push_back("[T]"); break;
      case SlotKind::Vector: out.push_back("[V]" + std::to_string(s.index + 1)); break;
    }
  }
  return out;
}

// Token slots take their ids from `tokens` in order.
std::vector<Slot> layout_from_json(const json& doc, const std::vector<TokenId>& tokens) {
  std::vector<Slot> layout;
  std::size_t next_token = 0;
  for (const auto& entry : doc) {
    auto s = entry.get<std::string>();
    if (s == kSubject) {
      layout.push_back(Slot::subject());
    } else if (s == kMask) {
      layout.push_back(Slot::mask());
    } else if (s == "[T]") {
      if (next_token >= tokens.size()) throw ParseError("prompt layout has more [T] slots than payload tokens");
      layout.push_back(Slot::token(tokens[next_token++]));
    } else if (s.rfind("[V]", 0) == 0) {
      layout.push_back(Slot::vector(std::stoi(s.substr(3)) - 1));
    } else {
      throw ParseError("unknown prompt layout slot '" + s + "'");
    }
  }
  if (next_token != tokens.size()) throw ParseError("prompt payload has unused tokens");
  return layout;
}

std::vector<TokenId> tokens_from_json(const json& doc, const Vocabulary& vocabulary) {
  std::vector<TokenId> ids;
  for (const auto& t : doc) ids.push_back(vocabulary.id(t.get<std::string>()));
  return ids;
}

}  // namespace

std::vector<Slot> TriggerTemplate::layout() const {
  std::vector<Slot> out{Slot::subject()};
  for (TokenId id : triggers) out.push_back(Slot::token(id));
  out.push_back(Slot::mask());
  return out;
}

const std::string& relation_of(const Prompt& prompt) {
  return std::visit([](const auto& t) -> const std::string& { return t.relation; }, prompt);
}

ManualTemplate parse_manual_template(const std::string& relation, std::string_view text, const Vocabulary& vocabulary) {
  ManualTemplate manual{relation, {}};
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto next_x = text.find(kSubject, pos);
    auto next_mask = text.find(kMask, pos);
    auto next = std::min(next_x, next_mask);
    for (const auto& piece : split_pieces(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos))) {
      auto id = vocabulary.find(piece);
      if (!id) throw VocabularyError(relation + ": template token '" + piece + "' not in vocabulary");
      if (vocabulary.is_special(*id)) throw ParseError(relation + ": template uses reserved token '" + piece + "'");
      manual.layout.push_back(Slot::token(*id));
    }
    if (next == std::string_view::npos) break;
    if (next == next_x) {
      manual.layout.push_back(Slot::subject());
      pos = next + std::strlen(kSubject);
    } else {
      manual.layout.push_back(Slot::mask());
      pos = next + std::strlen(kMask);
    }
  }
  try {
    validate(manual);
  } catch (const ArgumentError& e) {
    throw ParseError(std::string(e.what()) + " in \"" + std::string(text) + "\"");
  }
  return manual;
}

std::string to_text(const ManualTemplate& manual, const Vocabulary& vocabulary) {
  std::string out;
  for (const auto& s : manual.layout) {
    if (!out.empty()) out += ' ';
    if (s.kind == SlotKind::Subject) out += kSubject;
    else if (s.kind == SlotKind::Mask) out += kMask;
    else out += vocabulary.token(s.index);
  }
  return out;
}

void validate(const ManualTemplate& manual) {
  for (const auto& s : manual.layout)
    if (s.kind == SlotKind::Vector) throw ArgumentError(manual.relation + ": manual templates hold no dense vectors");
  detail::check_layout(manual.layout, 0, manual.relation);
}

void validate(const TriggerTemplate& trigger, const Vocabulary& vocabulary) {
  if (trigger.triggers.empty()) throw ArgumentError(trigger.relation + ": trigger template needs m >= 1");
  for (TokenId id : trigger.triggers)
    if (!vocabulary.contains(id) || vocabulary.is_special(id))
      throw ArgumentError(trigger.relation + ": trigger id " + std::to_string(id) + " is not a content token");
}

void save_prompts(const std::filesystem::path& path, const std::vector<Prompt>& prompts, const Vocabulary& vocabulary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& prompt : prompts) {
    json record;
    if (const auto* m = std::get_if<ManualTemplate>(&prompt)) {
      json tokens = json::array();
      for (const auto& s : m->layout)
        if (s.kind == SlotKind::Token) tokens.push_back(vocabulary.token(s.index));
      record = {{"relation", m->relation}, {"kind", "manual"}, {"layout", layout_to_json(m->layout)},
                {"payload", {{"tokens", tokens}}}};
    } else if (const auto* t = std::get_if<TriggerTemplate>(&prompt)) {
      json tokens = json::array();
      for (TokenId id : t->triggers) tokens.push_back(vocabulary.token(id));
      record = {{"relation", t->relation}, {"kind", "trigger"}, {"layout", layout_to_json(t->layout())},
                {"payload", {{"tokens", tokens}}}};
    } else {
      const auto& d = std::get<DensePrompt>(prompt);
      std::vector<std::byte> blob;
      for (Eigen::Index i = 0; i < d.vectors.size(); ++i)
        detail::append_little_endian(blob, d.vectors.data() + i, sizeof(double));
      record = {{"relation", d.relation},
                {"kind", "dense"},
                {"layout", layout_to_json(d.layout)},
                {"payload", {{"shape", {d.vectors.rows(), d.vectors.cols()}}, {"dtype", "float64"},
                             {"data", base64_encode(blob)}}}};
    }
    out << record.dump() << "\n";
  }
}

std::vector<Prompt> load_prompts(const std::filesystem::path& path, const Vocabulary& vocabulary) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Prompt> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      auto record = json::parse(line);
      auto relation = record.at("relation").get<std::string>();
      if (!record.contains("kind")) {
        prompts.push_back(parse_manual_template(relation, record.at("template").get<std::string>(), vocabulary));
        continue;
      }
      auto kind = record.at("kind").get<std::string>();
      const auto& payload = record.at("payload");
      if (kind == "manual") {
        ManualTemplate m{relation, layout_from_json(record.at("layout"), tokens_from_json(payload.at("tokens"), vocabulary))};
        validate(m);
        prompts.push_back(std::move(m));
      } else if (kind == "trigger") {
        TriggerTemplate t{relation, tokens_from_json(payload.at("tokens"), vocabulary)};
        if (layout_from_json(record.at("layout"), t.triggers) != t.layout())
          throw ParseError("trigger layout must be [X] [T]... [MASK]");
        validate(t, vocabulary);
        prompts.push_back(std::move(t));
      } else if (kind == "dense") {
        auto rows = payload.at("shape").at(0).get<Eigen::Index>();
        auto cols = payload.at("shape").at(1).get<Eigen::Index>();
        if (payload.value("dtype", "float64") != "float64") throw ParseError("dense payload must be float64");
        auto blob = base64_decode(payload.at("data").get<std::string>());
        if (blob.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
          throw ParseError("dense payload size does not match its shape");
        DensePrompt d{relation, Matrix<double>(rows, cols), layout_from_json(record.at("layout"), {})};
        for (Eigen::Index i = 0; i < d.vectors.size(); ++i)
          detail::read_little_endian(blob.data() + static_cast<std::size_t>(i) * sizeof(double), d.vectors.data() + i,
                                     sizeof(double));
        detail::check_layout(d.layout, d.size(), d.relation);
        prompts.push_back(std::move(d));
      } else {
        throw ParseError("unknown prompt kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
  }
  return prompts;
}

}  // namespace optiprobe
