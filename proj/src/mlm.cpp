#include "optiprobe/mlm.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace optiprobe {

using nlohmann::json;

void ModelConfig::validate() const {
  if (embed_dim < 1 || num_layers < 1 || num_heads < 1 || ffn_dim < 1 || max_seq_len < 1 || vocab_size < 2)
    throw ArgumentError("model config: dimensions must be positive and vocab_size >= 2");
  if (mask_id < 0 || mask_id >= vocab_size) throw ArgumentError("model config: mask_id outside the vocabulary");
  if (embed_dim % num_heads != 0)
    throw ArgumentError("model config: embed_dim " + std::to_string(embed_dim) + " not divisible by num_heads " +
                        std::to_string(num_heads));
}

bool ModelConfig::same_shape(const ModelConfig& o) const {
  return embed_dim == o.embed_dim && num_layers == o.num_layers && num_heads == o.num_heads && ffn_dim == o.ffn_dim &&
         max_seq_len == o.max_seq_len && vocab_size == o.vocab_size && mask_id == o.mask_id;
}

json to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"num_layers", c.num_layers}, {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},     {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size},
          {"mask_id", c.mask_id},     {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& doc) {
  ModelConfig c;
  c.embed_dim = doc.value("embed_dim", c.embed_dim);
  c.num_layers = doc.value("num_layers", c.num_layers);
  c.num_heads = doc.value("num_heads", c.num_heads);
  c.ffn_dim = doc.value("ffn_dim", c.ffn_dim);
  c.max_seq_len = doc.value("max_seq_len", c.max_seq_len);
  c.vocab_size = doc.value("vocab_size", c.vocab_size);
  c.mask_id = doc.value("mask_id", c.mask_id);
  c.seed = doc.value("seed", c.seed);
  return c;
}

namespace {

json base_to_json(const std::variant<FromCheckpoint, RandomModel>& base) {
  if (auto* c = std::get_if<FromCheckpoint>(&base)) return {{"kind", "checkpoint"}, {"path", c->path.string()}};
  return {{"kind", "random-model"}, {"seed", std::get<RandomModel>(base).seed}};
}

std::variant<FromCheckpoint, RandomModel> base_from_json(const json& doc) {
  auto kind = doc.at("kind").get<std::string>();
  if (kind == "checkpoint") return FromCheckpoint{doc.at("path").get<std::string>()};
  if (kind == "random-model") return RandomModel{doc.at("seed").get<std::uint64_t>()};
  throw ParseError("unknown base regime '" + kind + "'");
}

}  // namespace

json to_json(const InitRegime& regime) {
  if (auto* r = std::get_if<FromCheckpoint>(&regime)) return base_to_json(*r);
  if (auto* r = std::get_if<RandomModel>(&regime)) return base_to_json(*r);
  const auto& re = std::get<RandomEmbeddings>(regime);
  return {{"kind", "random-embeddings"}, {"base", base_to_json(re.base)}, {"seed", re.seed}};
}

InitRegime init_regime_from_json(const json& doc) {
  try {
    auto kind = doc.at("kind").get<std::string>();
    if (kind == "random-embeddings")
      return RandomEmbeddings{base_from_json(doc.at("base")), doc.at("seed").get<std::uint64_t>()};
    auto base = base_from_json(doc);
    if (auto* c = std::get_if<FromCheckpoint>(&base)) return *c;
    return std::get<RandomModel>(base);
  } catch (const json::exception& e) {
    throw ParseError(std::string("init regime: ") + e.what());
  }
}

json model_card(const ModelConfig& config, const InitRegime& regime) {
  return {{"architecture",
           {{"type", "pre-norm transformer encoder"},
            {"activation", "gelu (erf)"},
            {"positions", "learned absolute"},
            {"token_type_embeddings", false},
            {"dropout", 0.0},
            {"layer_norm_eps", kLayerNormEps},
            {"output_head", "tied to token embeddings, plus bias"},
            {"dense_prompt_vectors", "added to positional embeddings like token embeddings; no separate scaling"}}},
          {"init", {{"distribution", "normal(0, 0.02) for weights and embeddings; biases 0; layer-norm gains 1"}}},
          {"config", to_json(config)},
          {"regime", to_json(regime)}};
}

namespace detail {

void append_little_endian(std::vector<std::byte>& out, const void* value, std::size_t bytes) {
  const auto* p = static_cast<const std::byte*>(value);
  if constexpr (std::endian::native == std::endian::little) {
    out.insert(out.end(), p, p + bytes);
  } else {
    for (std::size_t i = bytes; i-- > 0;) out.push_back(p[i]);
  }
}

void read_little_endian(const std::byte* in, void* value, std::size_t bytes) {
  auto* p = static_cast<std::byte*>(value);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(p, in, bytes);
  } else {
    for (std::size_t i = 0; i < bytes; ++i) p[i] = in[bytes - 1 - i];
  }
}

std::string sha256_hex(std::span<const std::byte> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {
std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}
}  // namespace

void write_checkpoint_files(const std::filesystem::path& stem, const ModelConfig& config, int scalar_bytes,
                            const std::vector<TensorEntry>& tensors, std::span<const std::byte> blob) {
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    table.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += static_cast<std::size_t>(t.rows * t.cols) * static_cast<std::size_t>(scalar_bytes);
  }
  auto blob_path = with_suffix(stem, ".bin");
  json manifest = {{"format", "optiprobe-checkpoint"},
                   {"version", 1},
                   {"dtype", scalar_bytes == 4 ? "float32" : "float64"},
                   {"byte_order", "little"},
                   {"blob", blob_path.filename().string()},
                   {"sha256", sha256_hex(blob)},
                   {"config", to_json(config)},
                   {"tensors", table}};
  std::ofstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + blob_path.string());
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  std::ofstream js(with_suffix(stem, ".json"));
  if (!js) throw IoError("cannot write " + with_suffix(stem, ".json").string());
  js << manifest.dump(2) << "\n";
}

CheckpointData read_checkpoint_files(const std::filesystem::path& stem) {
  auto manifest_path = with_suffix(stem, ".json");
  std::ifstream js(manifest_path);
  if (!js) throw IoError("cannot read checkpoint manifest " + manifest_path.string());
  CheckpointData data;
  try {
    json manifest = json::parse(js);
    if (manifest.value("format", "") != "optiprobe-checkpoint")
      throw CheckpointError(manifest_path.string() + ": not an optiprobe checkpoint");
    auto dtype = manifest.at("dtype").get<std::string>();
    if (dtype == "float32") data.scalar_bytes = 4;
    else if (dtype == "float64") data.scalar_bytes = 8;
    else throw CheckpointError(manifest_path.string() + ": unsupported dtype " + dtype);
    data.config = model_config_from_json(manifest.at("config"));
    for (const auto& t : manifest.at("tensors"))
      data.tensors.push_back({t.at("name").get<std::string>(), t.at("shape").at(0).get<Eigen::Index>(),
                              t.at("shape").at(1).get<Eigen::Index>()});
    auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw IoError("cannot read checkpoint blob " + blob_path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    data.blob.resize(raw.size());
    std::memcpy(data.blob.data(), raw.data(), raw.size());
    if (manifest.contains("sha256") && manifest["sha256"].get<std::string>() != sha256_hex(data.blob))
      throw CheckpointError(blob_path.string() + ": checksum mismatch");
  } catch (const json::exception& e) {
    throw CheckpointError(manifest_path.string() + ": " + e.what());
  }
  data.config.validate();
  return data;
}

}  // namespace detail
}  // namespace optiprobe
