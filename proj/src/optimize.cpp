#include "optiprobe/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace optiprobe {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("train config: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ArgumentError("train config: learning_rate must be > 0");
  if (batch_size < 1) throw ArgumentError("train config: batch_size must be >= 1");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw ArgumentError("train config: warmup_ratio must be in [0, 1)");
  if (iterations < 0) throw ArgumentError("train config: iterations must be >= 0");
  if (clip_norm < 0.0) throw ArgumentError("train config: clip_norm must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},       {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"warmup_ratio", c.warmup_ratio}, {"seed", c.seed},             {"iterations", c.iterations},
          {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c) {
  c.epochs = doc.value("epochs", c.epochs);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.warmup_ratio = doc.value("warmup_ratio", c.warmup_ratio);
  c.seed = doc.value("seed", c.seed);
  c.iterations = doc.value("iterations", c.iterations);
  c.clip_norm = doc.value("clip_norm", c.clip_norm);
  return c;
}

void Adam::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
                double learning_rate) {
  if (params.size() != grads.size()) throw ArgumentError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ArgumentError("adam: tensor list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    if (p.size() != g.size() || p.size() != m.size()) throw ArgumentError("adam: tensor size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

LinearWarmupSchedule::LinearWarmupSchedule(double peak, long total_steps, double warmup_ratio)
    : peak_(peak),
      total_(total_steps),
      warmup_(static_cast<long>(std::floor(warmup_ratio * static_cast<double>(total_steps)))) {}

double LinearWarmupSchedule::at(long step) const {
  if (step <= warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
  if (total_ <= warmup_) return 0.0;
  return peak_ * std::max(0.0, static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_));
}

std::vector<std::span<double>> tensor_views(Parameters<double>& params) {
  std::vector<std::span<double>> views;
  params.for_each([&](const std::string&, auto& t) { views.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return views;
}

std::vector<std::span<const double>> tensor_views(const Parameters<double>& params) {
  std::vector<std::span<const double>> views;
  params.for_each(
      [&](const std::string&, const auto& t) { views.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return views;
}

namespace {

std::vector<TokenId> resolve_candidates(const Model& model, std::span<const TokenId> candidates) {
  if (!candidates.empty()) return {candidates.begin(), candidates.end()};
  std::vector<TokenId> all;
  for (TokenId id = 0; id < model.config.vocab_size; ++id)
    if (id != model.config.mask_id) all.push_back(id);
  return all;
}

double accuracy_or_nan(const Model& model, const Prompt& prompt, const std::vector<Fact>& facts,
                       std::span<const TokenId> candidates) {
  if (facts.empty()) return std::numeric_limits<double>::quiet_NaN();
  return top1_accuracy(model, prompt, facts, candidates);
}

// Deterministic per-epoch shuffles; the final partial batch is kept.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, int batch_size, std::uint64_t seed)
      : order_(n), batch_size_(static_cast<std::size_t>(batch_size)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
  }

  std::size_t batches_per_epoch() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
  void shuffle() { std::shuffle(order_.begin(), order_.end(), rng_); }
  std::span<const std::size_t> batch(std::size_t b) const {
    std::size_t begin = b * batch_size_;
    std::size_t end = std::min(order_.size(), begin + batch_size_);
    return {order_.data() + begin, end - begin};
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
};

std::string diagnostic(long step, double loss, double grad_norm) {
  std::ostringstream os;
  os << "non-finite training state at step " << step << ": loss=" << loss << " grad_norm=" << grad_norm;
  return os.str();
}

std::string diagnostic(const TrainConfig& config, long step, double loss, double grad_norm) {
  return diagnostic(step, loss, grad_norm) + " config=" + to_json(config).dump();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double mean_nll(const Model& model, const Prompt& prompt, std::span<const Fact> facts) {
  if (facts.empty()) return 0.0;
  double total = 0.0;
  for (const auto& f : facts) total += nll(model, render(prompt, f, model).input, f.object_id);
  return total / static_cast<double>(facts.size());
}

double top1_accuracy(const Model& model, const Prompt& prompt, std::span<const Fact> facts,
                     std::span<const TokenId> candidates) {
  if (facts.empty()) return 0.0;
  auto ids = resolve_candidates(model, candidates);
  std::size_t correct = 0;
  for (const auto& f : facts) {
    auto logits = forward_mask_logits(model, render(prompt, f, model).input);
    if (argmax_token<double>(logits, ids) == f.object_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(facts.size());
}

int select_epoch(const std::vector<EpochRecord>& epochs) {
  if (epochs.empty()) return 0;
  int best = epochs.back().epoch;
  double best_acc = -1.0;
  for (const auto& e : epochs) {
    if (std::isnan(e.dev_accuracy)) continue;
    if (e.dev_accuracy > best_acc) {
      best_acc = e.dev_accuracy;
      best = e.epoch;
    }
  }
  return best;
}

std::pair<DensePrompt, TrainTrace> train_optiprompt(const Model& model, const RelationDataset& dataset,
                                                    const DensePrompt& init, const TrainConfig& config,
                                                    std::span<const TokenId> candidates) {
  config.validate();
  validate(init, model.dim());
  const auto& train = dataset.train();
  if (train.empty()) throw ArgumentError("optiprompt: relation " + dataset.relation() + " has no training facts");
  auto start = std::chrono::steady_clock::now();
  auto ids = resolve_candidates(model, candidates);

  DensePrompt current = init;
  DensePrompt best = init;
  TrainTrace trace;
  trace.initial_train_nll = mean_nll(model, current, train);

  BatchSampler sampler(train.size(), config.batch_size, config.seed);
  LinearWarmupSchedule schedule(config.learning_rate,
                                static_cast<long>(config.epochs) * static_cast<long>(sampler.batches_per_epoch()),
                                config.warmup_ratio);
  Adam adam;
  long step = 0;
  double best_dev = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    sampler.shuffle();
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
      auto batch = sampler.batch(b);
      const double weight = 1.0 / static_cast<double>(batch.size());
      Matrix<double> grad = Matrix<double>::Zero(current.size(), model.dim());
      double loss = 0.0;
      for (std::size_t i : batch) {
        const Fact& f = train[i];
        auto rendered = render(current, f, model);
        Matrix<double> input_grad;
        loss += weight * accumulate_gradients<double>(model, rendered.input, f.object_id, weight, nullptr, &input_grad);
        for (Eigen::Index v = 0; v < current.size(); ++v)
          grad.row(v) += input_grad.row(rendered.vector_slot_positions[static_cast<std::size_t>(v)]);
      }
      ++step;
      if (!std::isfinite(loss) || !grad.allFinite()) throw TrainingError(diagnostic(config, step, loss, grad.norm()));
      adam.step({std::span<double>(current.vectors.data(), static_cast<std::size_t>(current.vectors.size()))},
                {std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size()))}, schedule.at(step));
    }
    EpochRecord record{epoch, mean_nll(model, current, train), accuracy_or_nan(model, current, dataset.dev(), ids)};
    trace.epochs.push_back(record);
    // dev-best snapshot, earliest epoch on ties; without dev data the last epoch wins
    if (std::isnan(record.dev_accuracy) || record.dev_accuracy > best_dev) {
      if (!std::isnan(record.dev_accuracy)) best_dev = record.dev_accuracy;
      best = current;
    }
  }
  trace.selected_epoch = select_epoch(trace.epochs);
  trace.wall_seconds = seconds_since(start);
  return {std::move(best), std::move(trace)};
}

std::pair<TriggerTemplate, TrainTrace> train_autoprompt_lite(const Model& model, const RelationDataset& dataset, int m,
                                                             const TrainConfig& config, int candidates_per_step,
                                                             const std::set<TokenId>& banned,
                                                             std::span<const TokenId> vocabulary_candidates) {
  config.validate();
  if (m < 1) throw ArgumentError("autoprompt: m must be >= 1");
  if (candidates_per_step < 1) throw ArgumentError("autoprompt: candidates_per_step must be >= 1");
  const auto& train = dataset.train();
  if (train.empty()) throw ArgumentError("autoprompt: relation " + dataset.relation() + " has no training facts");
  auto start = std::chrono::steady_clock::now();
  auto ids = resolve_candidates(model, vocabulary_candidates);
  std::vector<TokenId> allowed;
  for (TokenId id : ids)
    if (!banned.count(id) && id != model.config.mask_id) allowed.push_back(id);
  if (allowed.empty()) throw SearchError("autoprompt: every candidate token is banned for " + dataset.relation());

  TriggerTemplate current{dataset.relation(), std::vector<TokenId>(static_cast<std::size_t>(m), model.config.mask_id)};
  TriggerTemplate best = current;
  TrainTrace trace;
  trace.initial_train_nll = mean_nll(model, current, train);

  BatchSampler sampler(train.size(), config.batch_size, config.seed);
  const auto per_epoch = static_cast<long>(sampler.batches_per_epoch());
  double best_dev = -1.0;
  const Matrix<double>& table = model.params.token_embeddings;

  auto batch_loss = [&](const TriggerTemplate& t, std::span<const std::size_t> batch) {
    double loss = 0.0;
    for (std::size_t i : batch) loss += nll(model, render(t, train[i], model).input, train[i].object_id);
    return loss / static_cast<double>(batch.size());
  };

  for (long step = 1; step <= config.iterations; ++step) {
    const long in_epoch = (step - 1) % per_epoch;
    if (in_epoch == 0) sampler.shuffle();
    auto batch = sampler.batch(static_cast<std::size_t>(in_epoch));
    const std::size_t slot = static_cast<std::size_t>((step - 1) % m);

    // Batch-mean gradient at the trigger slot.
    RowVector<double> grad = RowVector<double>::Zero(model.dim());
    double current_loss = 0.0;
    const double weight = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      const Fact& f = train[i];
      auto rendered = render(current, f, model);
      Matrix<double> input_grad;
      current_loss += weight * accumulate_gradients<double>(model, rendered.input, f.object_id, weight, nullptr,
                                                            &input_grad);
      grad += input_grad.row(static_cast<Eigen::Index>(f.subject_tokens.size() + slot));
    }
    if (!std::isfinite(current_loss) || !grad.allFinite())
      throw TrainingError(diagnostic(config, step, current_loss, grad.norm()));

    // First-order estimate of the loss change for every admissible swap.
    const TokenId current_id = current.triggers[slot];
    std::vector<std::pair<double, TokenId>> ranked;
    ranked.reserve(allowed.size());
    for (TokenId id : allowed) {
      if (id == current_id) continue;
      ranked.emplace_back((table.row(id) - table.row(current_id)).dot(grad), id);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(candidates_per_step), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());

    TokenId chosen = current_id;
    double chosen_loss = current_id == model.config.mask_id ? std::numeric_limits<double>::infinity() : current_loss;
    std::vector<TokenId> shortlist;
    for (std::size_t c = 0; c < k; ++c) shortlist.push_back(ranked[c].second);
    std::sort(shortlist.begin(), shortlist.end());
    for (TokenId id : shortlist) {
      TriggerTemplate trial = current;
      trial.triggers[slot] = id;
      double loss = batch_loss(trial, batch);
      if (loss < chosen_loss) {
        chosen_loss = loss;
        chosen = id;
      }
    }
    current.triggers[slot] = chosen;

    if (step % per_epoch == 0 || step == config.iterations) {
      EpochRecord record{static_cast<int>((step + per_epoch - 1) / per_epoch), mean_nll(model, current, train),
                         accuracy_or_nan(model, current, dataset.dev(), ids)};
      trace.epochs.push_back(record);
      if (std::isnan(record.dev_accuracy) || record.dev_accuracy > best_dev) {
        if (!std::isnan(record.dev_accuracy)) best_dev = record.dev_accuracy;
        best = current;
      }
    }
  }
  trace.selected_epoch = select_epoch(trace.epochs);
  trace.wall_seconds = seconds_since(start);
  return {std::move(best), std::move(trace)};
}

double finetune_step(Model& model, std::span<const Fact> batch, const ManualTemplate& manual, Adam& adam,
                     double learning_rate, double clip_norm) {
  if (batch.empty()) throw ArgumentError("finetune: empty batch");
  auto grads = Parameters<double>::zeros(model.config);
  const double weight = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& f : batch)
    loss += weight * accumulate_gradients<double>(model, render(manual, f, model).input, f.object_id, weight, &grads,
                                                  nullptr);
  double sq = 0.0;
  for (auto view : tensor_views(std::as_const(grads)))
    for (double g : view) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(loss) || !std::isfinite(norm))
    throw TrainingError(diagnostic(adam.steps() + 1, loss, norm));
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto view : tensor_views(grads))
      for (double& g : view) g *= scale;
  }
  adam.step(tensor_views(model.params), tensor_views(std::as_const(grads)), learning_rate);
  return loss;
}

std::pair<Model, TrainTrace> finetune(const Model& model, const RelationDataset& dataset, const ManualTemplate& manual,
                                      const TrainConfig& config, std::span<const TokenId> candidates) {
  config.validate();
  validate(manual);
  const auto& train = dataset.train();
  if (train.empty()) throw ArgumentError("finetune: relation " + dataset.relation() + " has no training facts");
  auto start = std::chrono::steady_clock::now();
  auto ids = resolve_candidates(model, candidates);

  Model current = model;
  Model best = model;
  TrainTrace trace;
  trace.initial_train_nll = mean_nll(current, manual, train);

  BatchSampler sampler(train.size(), config.batch_size, config.seed);
  LinearWarmupSchedule schedule(config.learning_rate,
                                static_cast<long>(config.epochs) * static_cast<long>(sampler.batches_per_epoch()),
                                config.warmup_ratio);
  Adam adam;
  long step = 0;
  double best_dev = -1.0;
  std::vector<Fact> batch_facts;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    sampler.shuffle();
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
      batch_facts.clear();
      for (std::size_t i : sampler.batch(b)) batch_facts.push_back(train[i]);
      ++step;
      try {
        finetune_step(current, batch_facts, manual, adam, schedule.at(step), config.clip_norm);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (relation " + dataset.relation() + ", epoch " +
                            std::to_string(epoch) + ") config=" + to_json(config).dump());
      }
    }
    EpochRecord record{epoch, mean_nll(current, manual, train), accuracy_or_nan(current, manual, dataset.dev(), ids)};
    trace.epochs.push_back(record);
    if (std::isnan(record.dev_accuracy) || record.dev_accuracy > best_dev) {
      if (!std::isnan(record.dev_accuracy)) best_dev = record.dev_accuracy;
      best = current;
    }
  }
  trace.selected_epoch = select_epoch(trace.epochs);
  trace.wall_seconds = seconds_since(start);
  return {std::move(best), std::move(trace)};
}

}  // namespace optiprobe
