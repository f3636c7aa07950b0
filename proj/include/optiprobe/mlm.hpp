#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "optiprobe/corpus.hpp"
#include "optiprobe/error.hpp"

namespace optiprobe {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct ModelConfig {
  int embed_dim = 16;
  int num_layers = 1;
  int num_heads = 2;
  int ffn_dim = 32;
  int max_seq_len = 32;
  int vocab_size = 0;
  TokenId mask_id = 0;  // embedding row used for the [MASK] slot
  std::uint64_t seed = 0;

  int head_dim() const { return embed_dim / num_heads; }
  // Throws ArgumentError on inconsistent dimensions.
  void validate() const;
  // Same tensor shapes and mask token.
  bool same_shape(const ModelConfig& other) const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

template <typename Scalar>
struct BlockParameters {
  RowVector<Scalar> ln1_gain, ln1_bias;
  Matrix<Scalar> wq, wk, wv, wo;
  RowVector<Scalar> bq, bk, bv, bo;
  RowVector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> w1, w2;
  RowVector<Scalar> b1, b2;
};

// Every learned tensor of the reference encoder. The same layout holds
// gradients and optimizer moments.
template <typename Scalar>
struct Parameters {
  // vocab x d; also the output projection (weight tying).
  Matrix<Scalar> token_embeddings;
  Matrix<Scalar> position_embeddings;  // max_seq_len x d
  std::vector<BlockParameters<Scalar>> blocks;
  RowVector<Scalar> final_gain, final_bias;
  RowVector<Scalar> output_bias;  // vocab

  static Parameters zeros(const ModelConfig& config);

  // Visits (name, tensor) in a fixed canonical order. Works on const and
  // non-const instances.
  template <typename Self, typename Visitor>
  static void visit(Self& self, Visitor&& visit_tensor) {
    visit_tensor(std::string("token_embeddings"), self.token_embeddings);
    visit_tensor(std::string("position_embeddings"), self.position_embeddings);
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string p = "blocks." + std::to_string(i) + ".";
      visit_tensor(p + "ln1.gain", b.ln1_gain);
      visit_tensor(p + "ln1.bias", b.ln1_bias);
      visit_tensor(p + "attn.wq", b.wq);
      visit_tensor(p + "attn.bq", b.bq);
      visit_tensor(p + "attn.wk", b.wk);
      visit_tensor(p + "attn.bk", b.bk);
      visit_tensor(p + "attn.wv", b.wv);
      visit_tensor(p + "attn.bv", b.bv);
      visit_tensor(p + "attn.wo", b.wo);
      visit_tensor(p + "attn.bo", b.bo);
      visit_tensor(p + "ln2.gain", b.ln2_gain);
      visit_tensor(p + "ln2.bias", b.ln2_bias);
      visit_tensor(p + "ffn.w1", b.w1);
      visit_tensor(p + "ffn.b1", b.b1);
      visit_tensor(p + "ffn.w2", b.w2);
      visit_tensor(p + "ffn.b2", b.b2);
    }
    visit_tensor(std::string("final_ln.gain"), self.final_gain);
    visit_tensor(std::string("final_ln.bias"), self.final_bias);
    visit_tensor(std::string("output_bias"), self.output_bias);
  }

  template <typename Visitor>
  void for_each(Visitor&& v) { visit(*this, std::forward<Visitor>(v)); }
  template <typename Visitor>
  void for_each(Visitor&& v) const { visit(*this, std::forward<Visitor>(v)); }
};

/// Pre-norm transformer encoder with learned positions, GELU feed-forward,
/// a final layer norm and an output head tied to the token embeddings.
template <typename Scalar>
struct MlmModel {
  ModelConfig config;
  Parameters<Scalar> params;

  Eigen::Index dim() const { return config.embed_dim; }
  auto embedding(TokenId id) const { return params.token_embeddings.row(id); }
};

using Model = MlmModel<double>;

// Model input before positional terms are added. Rows that came from a token
// lookup record the token id so parameter gradients reach the embedding table;
// free vectors carry kNoToken.
template <typename Scalar>
struct EncodedInput {
  Matrix<Scalar> vectors;
  std::vector<TokenId> token_ids;
  Eigen::Index mask_position = 0;

  Eigen::Index length() const { return vectors.rows(); }
};

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStddev = 0.02;

namespace detail {

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> xhat;
  Vector<Scalar> rstd;
};

template <typename Scalar>
struct BlockCache {
  Matrix<Scalar> x;
  LayerNormCache<Scalar> ln1;
  Matrix<Scalar> h1, q, k, v;
  std::vector<Matrix<Scalar>> probs;
  Matrix<Scalar> context, x1;
  LayerNormCache<Scalar> ln2;
  Matrix<Scalar> h2, pre_act, act;
};

template <typename Scalar>
struct ForwardCache {
  std::vector<BlockCache<Scalar>> blocks;
  LayerNormCache<Scalar> final_ln;  // mask row only
  RowVector<Scalar> hidden;         // mask row after the final layer norm
  Vector<Scalar> logits;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const RowVector<Scalar>& gain, const RowVector<Scalar>& bias,
                          LayerNormCache<Scalar>& cache) {
  const auto rows = x.rows();
  const auto d = static_cast<Scalar>(x.cols());
  cache.xhat.resize(rows, x.cols());
  cache.rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    Scalar mean = x.row(i).sum() / d;
    RowVector<Scalar> centered = x.row(i).array() - mean;
    Scalar var = centered.squaredNorm() / d;
    Scalar r = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    cache.rstd(i) = r;
    cache.xhat.row(i) = centered * r;
  }
  Matrix<Scalar> y = cache.xhat.array().rowwise() * gain.array();
  y.rowwise() += bias;
  return y;
}

// Returns dL/dx; accumulates gain/bias gradients when requested.
template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const LayerNormCache<Scalar>& cache,
                                   const RowVector<Scalar>& gain, RowVector<Scalar>* dgain, RowVector<Scalar>* dbias) {
  if (dgain) *dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  if (dbias) *dbias += dy.colwise().sum();
  Matrix<Scalar> dxhat = dy.array().rowwise() * gain.array();
  Matrix<Scalar> dx(dy.rows(), dy.cols());
  const auto d = static_cast<Scalar>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    Scalar mean_dxhat = dxhat.row(i).sum() / d;
    Scalar mean_dxhat_xhat = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.rstd(i) * (dxhat.row(i).array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar u) {
  return Scalar(0.5) * u * (Scalar(1) + std::erf(u / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar u) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return Scalar(0.5) * (Scalar(1) + std::erf(u / std::sqrt(Scalar(2)))) +
         u * static_cast<Scalar>(kInvSqrt2Pi) * std::exp(-Scalar(0.5) * u * u);
}

template <typename Scalar>
void softmax_rows(Matrix<Scalar>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Scalar m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

template <typename Scalar>
void check_input(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input) {
  const auto len = input.length();
  if (len < 1 || len > model.config.max_seq_len)
    throw ArgumentError("sequence length " + std::to_string(len) + " outside [1, " +
                        std::to_string(model.config.max_seq_len) + "]");
  if (input.vectors.cols() != model.dim())
    throw ArgumentError("input dimension " + std::to_string(input.vectors.cols()) + " != model dimension " +
                        std::to_string(model.dim()));
  if (input.mask_position < 0 || input.mask_position >= len)
    throw ArgumentError("mask position " + std::to_string(input.mask_position) + " out of range");
  if (!input.token_ids.empty() && static_cast<Eigen::Index>(input.token_ids.size()) != len)
    throw ArgumentError("token_ids length does not match the input");
}

template <typename Scalar>
Vector<Scalar> forward(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input, ForwardCache<Scalar>& cache) {
  check_input(model, input);
  const auto& p = model.params;
  const auto len = input.length();
  const int heads = model.config.num_heads;
  const int dh = model.config.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix<Scalar> x = input.vectors + p.position_embeddings.topRows(len);
  cache.blocks.resize(p.blocks.size());
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& b = p.blocks[l];
    auto& c = cache.blocks[l];
    c.x = x;
    c.h1 = layer_norm(x, b.ln1_gain, b.ln1_bias, c.ln1);
    c.q = c.h1 * b.wq;
    c.q.rowwise() += b.bq;
    c.k = c.h1 * b.wk;
    c.k.rowwise() += b.bk;
    c.v = c.h1 * b.wv;
    c.v.rowwise() += b.bv;
    c.probs.resize(static_cast<std::size_t>(heads));
    c.context.resize(len, model.dim());
    for (int h = 0; h < heads; ++h) {
      Matrix<Scalar> s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(s);
      c.context.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
      c.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    Matrix<Scalar> attn = c.context * b.wo;
    attn.rowwise() += b.bo;
    c.x1 = x + attn;
    c.h2 = layer_norm(c.x1, b.ln2_gain, b.ln2_bias, c.ln2);
    c.pre_act = c.h2 * b.w1;
    c.pre_act.rowwise() += b.b1;
    c.act = c.pre_act.unaryExpr([](Scalar u) { return gelu(u); });
    Matrix<Scalar> ffn = c.act * b.w2;
    ffn.rowwise() += b.b2;
    x = c.x1 + ffn;
  }
  Matrix<Scalar> mask_row = x.row(input.mask_position);
  cache.hidden = layer_norm(mask_row, p.final_gain, p.final_bias, cache.final_ln);
  cache.logits = p.token_embeddings * cache.hidden.transpose() + p.output_bias.transpose();
  return cache.logits;
}

// Backpropagates dL/dlogits. Parameter gradients are added into `grads` when
// non-null; returns dL/d(input vectors).
template <typename Scalar>
Matrix<Scalar> backward(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input,
                        const ForwardCache<Scalar>& cache, const Vector<Scalar>& dlogits, Parameters<Scalar>* grads) {
  const auto& p = model.params;
  const auto len = input.length();
  const int heads = model.config.num_heads;
  const int dh = model.config.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  if (grads) {
    grads->output_bias += dlogits.transpose();
    grads->token_embeddings.noalias() += dlogits * cache.hidden;
  }
  Matrix<Scalar> dhidden = dlogits.transpose() * p.token_embeddings;
  Matrix<Scalar> dmask_row = layer_norm_backward(dhidden, cache.final_ln, p.final_gain,
                                                 grads ? &grads->final_gain : nullptr,
                                                 grads ? &grads->final_bias : nullptr);
  Matrix<Scalar> dx = Matrix<Scalar>::Zero(len, model.dim());
  dx.row(input.mask_position) = dmask_row;

  for (std::size_t l = p.blocks.size(); l-- > 0;) {
    const auto& b = p.blocks[l];
    const auto& c = cache.blocks[l];
    BlockParameters<Scalar>* g = grads ? &grads->blocks[l] : nullptr;

    // x_out = x1 + ffn(ln2(x1))
    Matrix<Scalar> dx1 = dx;
    if (g) {
      g->w2.noalias() += c.act.transpose() * dx;
      g->b2 += dx.colwise().sum();
    }
    Matrix<Scalar> dact = dx * b.w2.transpose();
    Matrix<Scalar> dpre = dact.array() * c.pre_act.unaryExpr([](Scalar u) { return gelu_grad(u); }).array();
    if (g) {
      g->w1.noalias() += c.h2.transpose() * dpre;
      g->b1 += dpre.colwise().sum();
    }
    Matrix<Scalar> dh2 = dpre * b.w1.transpose();
    dx1 += layer_norm_backward(dh2, c.ln2, b.ln2_gain, g ? &g->ln2_gain : nullptr, g ? &g->ln2_bias : nullptr);

    // x1 = x + attn(ln1(x))
    Matrix<Scalar> dx_in = dx1;
    if (g) {
      g->wo.noalias() += c.context.transpose() * dx1;
      g->bo += dx1.colwise().sum();
    }
    Matrix<Scalar> dcontext = dx1 * b.wo.transpose();
    Matrix<Scalar> dq(len, model.dim()), dk(len, model.dim()), dv(len, model.dim());
    for (int h = 0; h < heads; ++h) {
      const auto& prob = c.probs[static_cast<std::size_t>(h)];
      Matrix<Scalar> dctx_h = dcontext.middleCols(h * dh, dh);
      Matrix<Scalar> dprob = dctx_h * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = prob.transpose() * dctx_h;
      Vector<Scalar> row_dot = (dprob.array() * prob.array()).rowwise().sum();
      Matrix<Scalar> ds = prob.array() * (dprob.colwise() - row_dot).array();
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh) * scale;
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh) * scale;
    }
    if (g) {
      g->wq.noalias() += c.h1.transpose() * dq;
      g->bq += dq.colwise().sum();
      g->wk.noalias() += c.h1.transpose() * dk;
      g->bk += dk.colwise().sum();
      g->wv.noalias() += c.h1.transpose() * dv;
      g->bv += dv.colwise().sum();
    }
    Matrix<Scalar> dh1 = dq * b.wq.transpose() + dk * b.wk.transpose() + dv * b.wv.transpose();
    dx_in += layer_norm_backward(dh1, c.ln1, b.ln1_gain, g ? &g->ln1_gain : nullptr, g ? &g->ln1_bias : nullptr);
    dx = std::move(dx_in);
  }

  if (grads) {
    grads->position_embeddings.topRows(len) += dx;
    for (Eigen::Index i = 0; i < len && !input.token_ids.empty(); ++i) {
      TokenId id = input.token_ids[static_cast<std::size_t>(i)];
      if (id != kNoToken) grads->token_embeddings.row(id) += dx.row(i);
    }
  }
  return dx;
}

template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& v) {
  Scalar m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

/// Unnormalised scores over the whole vocabulary at the mask position.
template <typename Scalar>
Vector<Scalar> forward_mask_logits(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input) {
  detail::ForwardCache<Scalar> cache;
  return detail::forward(model, input, cache);
}

/// -log softmax(logits)[target].
template <typename Scalar>
Scalar nll(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input, TokenId target) {
  Vector<Scalar> logits = forward_mask_logits(model, input);
  return detail::log_sum_exp(logits) - logits(target);
}

// Adds weight * d(NLL)/d(params) into `param_grads` (may be null) and
// weight * d(NLL)/d(inputs) into `input_grads` (may be null). Returns the
// unweighted NLL.
template <typename Scalar>
Scalar accumulate_gradients(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input, TokenId target,
                            Scalar weight, Parameters<Scalar>* param_grads, Matrix<Scalar>* input_grads) {
  if (target < 0 || target >= model.config.vocab_size) throw ArgumentError("target id out of range");
  detail::ForwardCache<Scalar> cache;
  Vector<Scalar> logits = detail::forward(model, input, cache);
  const Scalar lse = detail::log_sum_exp(logits);
  Vector<Scalar> dlogits = (logits.array() - lse).exp().matrix();
  dlogits(target) -= Scalar(1);
  dlogits *= weight;
  Matrix<Scalar> dx = detail::backward(model, input, cache, dlogits, param_grads);
  if (input_grads) {
    if (input_grads->size() == 0) input_grads->setZero(dx.rows(), dx.cols());
    *input_grads += dx;
  }
  return lse - logits(target);
}

/// Gradient of the NLL with respect to each input vector; parameters untouched.
template <typename Scalar>
Matrix<Scalar> grad_wrt_inputs(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input, TokenId target) {
  Matrix<Scalar> grads;
  accumulate_gradients<Scalar>(model, input, target, Scalar(1), nullptr, &grads);
  return grads;
}

/// Gradient of the NLL with respect to every parameter. The tied embedding
/// table collects both its input-lookup and output-head contributions.
template <typename Scalar>
Parameters<Scalar> grad_wrt_params(const MlmModel<Scalar>& model, const EncodedInput<Scalar>& input, TokenId target) {
  auto grads = Parameters<Scalar>::zeros(model.config);
  accumulate_gradients<Scalar>(model, input, target, Scalar(1), &grads, nullptr);
  return grads;
}

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::zeros(const ModelConfig& config) {
  config.validate();
  const int d = config.embed_dim;
  Parameters p;
  p.token_embeddings = Matrix<Scalar>::Zero(config.vocab_size, d);
  p.position_embeddings = Matrix<Scalar>::Zero(config.max_seq_len, d);
  p.blocks.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& b : p.blocks) {
    b.ln1_gain = b.ln1_bias = b.ln2_gain = b.ln2_bias = RowVector<Scalar>::Zero(d);
    b.wq = b.wk = b.wv = b.wo = Matrix<Scalar>::Zero(d, d);
    b.bq = b.bk = b.bv = b.bo = b.b2 = RowVector<Scalar>::Zero(d);
    b.w1 = Matrix<Scalar>::Zero(d, config.ffn_dim);
    b.b1 = RowVector<Scalar>::Zero(config.ffn_dim);
    b.w2 = Matrix<Scalar>::Zero(config.ffn_dim, d);
  }
  p.final_gain = p.final_bias = RowVector<Scalar>::Zero(d);
  p.output_bias = RowVector<Scalar>::Zero(config.vocab_size);
  return p;
}

// ---------------------------------------------------------------------------
// Initialisation regimes.

struct FromCheckpoint {
  std::filesystem::path path;
};
struct RandomModel {
  std::uint64_t seed = 0;
};
struct RandomEmbeddings {
  std::variant<FromCheckpoint, RandomModel> base;
  std::uint64_t seed = 0;
};
using InitRegime = std::variant<FromCheckpoint, RandomModel, RandomEmbeddings>;

nlohmann::json to_json(const InitRegime& regime);
InitRegime init_regime_from_json(const nlohmann::json& doc);

namespace detail {

inline std::string last_segment(const std::string& name) {
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

inline bool is_gain(const std::string& name) { return last_segment(name) == "gain"; }

// bq, bk, bv, bo, b1, b2, bias, output_bias
inline bool is_bias(const std::string& name) {
  auto last = last_segment(name);
  return name == "output_bias" || last == "bias" || (last.size() == 2 && last[0] == 'b');
}

template <typename Scalar, typename Tensor>
void fill_normal(Tensor& t, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStddev);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
}

// Weight matrices and embeddings ~ N(0, 0.02); biases 0; layer-norm gains 1.
template <typename Scalar>
void init_tensor(const std::string& name, auto& tensor, std::mt19937_64& rng) {
  if (is_gain(name)) tensor.setOnes();
  else if (is_bias(name)) tensor.setZero();
  else fill_normal<Scalar>(tensor, rng);
}

}  // namespace detail

template <typename Scalar>
MlmModel<Scalar> random_model(const ModelConfig& config, std::uint64_t seed) {
  MlmModel<Scalar> model{config, Parameters<Scalar>::zeros(config)};
  std::mt19937_64 rng(seed);
  model.params.for_each([&](const std::string& name, auto& t) { detail::init_tensor<Scalar>(name, t, rng); });
  return model;
}

template <typename Scalar>
void save_checkpoint(const MlmModel<Scalar>& model, const std::filesystem::path& stem);
template <typename Scalar>
MlmModel<Scalar> load_checkpoint(const std::filesystem::path& stem);

/// Builds a model under the given regime. RandomEmbeddings keeps every block,
/// position and layer-norm tensor of the base and redraws the token embedding
/// table (and so the tied head) plus the output bias.
template <typename Scalar>
MlmModel<Scalar> init_model(const ModelConfig& config, const InitRegime& regime) {
  config.validate();
  auto from_base = [&](const std::variant<FromCheckpoint, RandomModel>& base) {
    if (auto* ckpt = std::get_if<FromCheckpoint>(&base)) {
      auto model = load_checkpoint<Scalar>(ckpt->path);
      if (!model.config.same_shape(config))
        throw CheckpointError("checkpoint " + ckpt->path.string() + " does not match the requested model shape");
      model.config.seed = config.seed;
      return model;
    }
    return random_model<Scalar>(config, std::get<RandomModel>(base).seed);
  };
  if (auto* r = std::get_if<FromCheckpoint>(&regime)) return from_base(*r);
  if (auto* r = std::get_if<RandomModel>(&regime)) return from_base(*r);
  const auto& re = std::get<RandomEmbeddings>(regime);
  auto model = from_base(re.base);
  std::mt19937_64 rng(re.seed);
  detail::fill_normal<Scalar>(model.params.token_embeddings, rng);
  model.params.output_bias.setZero();
  return model;
}

/// Index of the largest logit among `candidates` (ascending ids); the lowest id
/// wins exact ties.
template <typename Scalar>
TokenId argmax_token(const Vector<Scalar>& logits, std::span<const TokenId> candidates) {
  TokenId best = kNoToken;
  Scalar best_value = Scalar(0);
  for (TokenId id : candidates) {
    Scalar value = logits(id);
    if (best == kNoToken || value > best_value || (value == best_value && id < best)) {
      best = id;
      best_value = value;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Checkpoints: <stem>.json manifest (config, dtype, tensor table) next to a
// <stem>.bin blob of little-endian IEEE floats in canonical tensor order.

namespace detail {
struct TensorEntry {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
};
void write_checkpoint_files(const std::filesystem::path& stem, const ModelConfig& config, int scalar_bytes,
                            const std::vector<TensorEntry>& tensors, std::span<const std::byte> blob);
struct CheckpointData {
  ModelConfig config;
  int scalar_bytes = 0;
  std::vector<TensorEntry> tensors;
  std::vector<std::byte> blob;
};
CheckpointData read_checkpoint_files(const std::filesystem::path& stem);
void append_little_endian(std::vector<std::byte>& out, const void* value, std::size_t bytes);
void read_little_endian(const std::byte* in, void* value, std::size_t bytes);
std::string sha256_hex(std::span<const std::byte> bytes);

template <typename Scalar>
std::vector<std::byte> serialize(const Parameters<Scalar>& params, std::vector<TensorEntry>* entries) {
  std::vector<std::byte> blob;
  params.for_each([&](const std::string& name, const auto& t) {
    if (entries) entries->push_back({name, t.rows(), t.cols()});
    for (Eigen::Index i = 0; i < t.size(); ++i) append_little_endian(blob, t.data() + i, sizeof(Scalar));
  });
  return blob;
}
}  // namespace detail

template <typename Scalar>
void save_checkpoint(const MlmModel<Scalar>& model, const std::filesystem::path& stem) {
  std::vector<detail::TensorEntry> entries;
  auto blob = detail::serialize(model.params, &entries);
  detail::write_checkpoint_files(stem, model.config, sizeof(Scalar), entries, blob);
}

template <typename Scalar>
MlmModel<Scalar> load_checkpoint(const std::filesystem::path& stem) {
  auto data = detail::read_checkpoint_files(stem);
  if (data.scalar_bytes != static_cast<int>(sizeof(Scalar)))
    throw CheckpointError(stem.string() + ": stored scalar width " + std::to_string(data.scalar_bytes) +
                          " bytes, expected " + std::to_string(sizeof(Scalar)));
  MlmModel<Scalar> model{data.config, Parameters<Scalar>::zeros(data.config)};
  std::size_t index = 0, offset = 0;
  model.params.for_each([&](const std::string& name, auto& t) {
    if (index >= data.tensors.size()) throw CheckpointError(stem.string() + ": missing tensor " + name);
    const auto& e = data.tensors[index++];
    if (e.name != name || e.rows != t.rows() || e.cols != t.cols())
      throw CheckpointError(stem.string() + ": tensor " + e.name + " does not match expected " + name);
    const std::size_t bytes = static_cast<std::size_t>(t.size()) * sizeof(Scalar);
    if (offset + bytes > data.blob.size()) throw CheckpointError(stem.string() + ": blob truncated");
    for (Eigen::Index i = 0; i < t.size(); ++i)
      detail::read_little_endian(data.blob.data() + offset + static_cast<std::size_t>(i) * sizeof(Scalar),
                                 t.data() + i, sizeof(Scalar));
    offset += bytes;
  });
  if (index != data.tensors.size() || offset != data.blob.size())
    throw CheckpointError(stem.string() + ": unexpected trailing tensors or bytes");
  return model;
}

/// SHA-256 over the canonical serialisation of every tensor.
template <typename Scalar>
std::string tensor_hash(const MlmModel<Scalar>& model) {
  auto blob = detail::serialize(model.params, nullptr);
  return detail::sha256_hex(blob);
}

/// Provenance record for reports: config, regime and architecture notes.
nlohmann::json model_card(const ModelConfig& config, const InitRegime& regime);

}  // namespace optiprobe
