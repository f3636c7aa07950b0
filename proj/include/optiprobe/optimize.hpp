#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "optiprobe/corpus.hpp"
#include "optiprobe/mlm.hpp"
#include "optiprobe/prompts.hpp"

namespace optiprobe {

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 3e-3;
  int batch_size = 16;
  double warmup_ratio = 0.1;
  std::uint64_t seed = 0;
  // Step budget of the discrete trigger search.
  int iterations = 1000;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;

  static TrainConfig optiprompt_defaults() { return {}; }
  static TrainConfig finetune_defaults() { return {10, 2e-6, 2, 0.1, 0, 1000, 1.0}; }

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep the values of `defaults`.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are allocated on the first step and
/// matched to tensors by position.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
            double learning_rate);
  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Linear warmup to the peak rate over floor(ratio * total) steps, then linear
/// decay to zero at the final step. Steps are 1-based.
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double peak, long total_steps, double warmup_ratio);

  double at(long step) const;
  long warmup_steps() const { return warmup_; }
  long total_steps() const { return total_; }

 private:
  double peak_;
  long total_;
  long warmup_;
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;
  double dev_accuracy = 0.0;  // NaN when the dev split is empty
};

struct TrainTrace {
  double initial_train_nll = 0.0;
  std::vector<EpochRecord> epochs;
  int selected_epoch = 0;  // 0: nothing selected (no epochs ran)
  double wall_seconds = 0.0;
};

// Mean NLL of the gold objects under a prompt.
double mean_nll(const Model& model, const Prompt& prompt, std::span<const Fact> facts);
// Top-1 accuracy over `candidates` (empty: every id except the mask id).
double top1_accuracy(const Model& model, const Prompt& prompt, std::span<const Fact> facts,
                     std::span<const TokenId> candidates);

// Selects the dev-best epoch (earliest on ties; last epoch when dev is empty).
int select_epoch(const std::vector<EpochRecord>& epochs);

/// Optimises only the dense vectors of `init` against the frozen model. Returns
/// the dev-best snapshot.
std::pair<DensePrompt, TrainTrace> train_optiprompt(const Model& model, const RelationDataset& dataset,
                                                    const DensePrompt& init, const TrainConfig& config,
                                                    std::span<const TokenId> candidates = {});

/// Gradient-guided discrete trigger search. Triggers start as the mask token;
/// each step revisits one position (round-robin), ranks every allowed token by
/// (e_w - e_current) . dL/dx, re-scores the `candidates_per_step` best exactly on
/// the batch and keeps the lowest loss. `vocabulary_candidates` lists the
/// admissible tokens and the prediction candidates (empty: every id except the
/// mask id); `banned` tokens are never chosen.
std::pair<TriggerTemplate, TrainTrace> train_autoprompt_lite(const Model& model, const RelationDataset& dataset, int m,
                                                             const TrainConfig& config, int candidates_per_step,
                                                             const std::set<TokenId>& banned,
                                                             std::span<const TokenId> vocabulary_candidates = {});

/// One Adam update of every parameter on the batch mean NLL. Returns the batch
/// loss; throws TrainingError on a non-finite loss or gradient.
double finetune_step(Model& model, std::span<const Fact> batch, const ManualTemplate& manual, Adam& adam,
                     double learning_rate, double clip_norm);

/// Trains all parameters of a copy of `model`; returns the dev-best copy.
std::pair<Model, TrainTrace> finetune(const Model& model, const RelationDataset& dataset, const ManualTemplate& manual,
                                      const TrainConfig& config, std::span<const TokenId> candidates = {});

// Flat views over every tensor, in canonical order.
std::vector<std::span<double>> tensor_views(Parameters<double>& params);
std::vector<std::span<const double>> tensor_views(const Parameters<double>& params);

}  // namespace optiprobe
