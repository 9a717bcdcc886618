#pragma once

// Two-phase optimisation: MT-only pretraining, then rounds of joint MT+ML
// training each followed by a fresh association pass.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "mtml/association.hpp"
#include "mtml/datagen.hpp"
#include "mtml/model.hpp"

namespace mtml {

struct TrainConfig {
  double lambda_ml = kDefaultLambda;
  double initial_lr = 0.05;
  int pretrain_epochs = 100;
  int pretrain_decay_every = 40;
  double decay_factor = 0.1;
  int ml_iterations = 8;
  int epochs_per_iteration = 15;
  int ml_decay_after_epoch = 8;
  // Learning rate at the start of every ML iteration.
  double ml_base_lr = 0.005;
  int persons_per_camera = 2;
  int images_per_person = 4;
  // Associate once right after pretraining so the first ML round has labels.
  bool initial_association = true;
  // Keep the ML label set empty (MT ablation arm); the epoch schedule is unchanged.
  bool mt_only = false;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Phase { kPretrain, kMultiLabel };

std::string_view to_string(Phase phase) noexcept;

// Pretrain: initial_lr * decay^floor(epoch / pretrain_decay_every).
// ML phase: ml_base_lr, times decay from epoch ml_decay_after_epoch on (0-based).
double lr_schedule(const TrainConfig& config, Phase phase, int epoch_within_phase);

// w <- w - lr * g. Throws kNumericFailure (leaving params untouched) on
// non-finite gradients, kInvalidArgument on a non-positive rate.
void sgd_step(ModelParams& params, const GradientSet& grads, double lr);

struct EpochRecord {
  Phase phase = Phase::kPretrain;
  int iteration = 0;  // 0 during pretraining, 1-based afterwards
  int epoch = 0;      // within the phase / iteration
  double lr = 0.0;
  double mt_loss = 0.0;  // means over the epoch's batches
  double ml_loss = 0.0;
  double total = 0.0;
  std::size_t pairs_discovered = 0;  // size of the label set in use
  std::optional<double> association_precision;
};

struct AssociationRound {
  int round = 0;  // 0 = pass right after pretraining
  std::size_t pairs = 0;
  std::optional<double> precision;
  std::vector<AssociationDumpRow> rows;
};

struct TrainState {
  ModelParams params;
  double current_lr = 0.0;
  int epoch = 0;  // epochs completed across both phases
  int iteration = 0;
  MultiLabelSet multilabels;
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;
  std::vector<AssociationRound> rounds;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::string_view tag, const ModelParams&)> on_checkpoint;
  std::function<void(const AssociationRound&)> on_association;
};

// The model's input_dim and heads must match the dataset (kIncompatibleArtifacts).
TrainState pretrain_mt(const IcsDataset& dataset, const ModelConfig& model, const TrainConfig& config,
                       const TrainHooks& hooks = {});

TrainState train_mtml(const IcsDataset& dataset, const TrainConfig& config, TrainState state,
                      const TrainHooks& hooks = {});

// Per-camera training accuracy of each camera's own head.
std::vector<double> camera_accuracy(const ModelParams& params, const IcsDataset& dataset);

// Fills input_dim and heads from the dataset.
ModelConfig fit_model_config(ModelConfig config, const IcsDataset& dataset);

}  // namespace mtml
