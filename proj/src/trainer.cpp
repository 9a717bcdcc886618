#include "mtml/trainer.hpp"

#include <cmath>
#include <string>

#include "mtml/error.hpp"

namespace mtml {

namespace {

bool finite_all(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void check_compatible(const ModelParams& params, const IcsDataset& dataset) {
  if (params.config.input_dim != dataset.feature_dim) {
    fail(ErrorCode::kIncompatibleArtifacts, "model input_dim " + std::to_string(params.config.input_dim) +
                                                " vs dataset feature_dim " + std::to_string(dataset.feature_dim));
  }
  if (params.config.heads != dataset.identity_counts()) {
    fail(ErrorCode::kIncompatibleArtifacts, "model heads do not match per-camera identity counts");
  }
}

EpochRecord run_epoch(TrainState& state, const IcsDataset& dataset, const BatchSampler& sampler,
                      const LossSpec& spec, double lr) {
  const std::size_t total = dataset.num_samples();
  const std::size_t batch = sampler.batch_size();
  const std::size_t batches = (total + batch - 1) / batch;
  EpochRecord rec;
  rec.lr = lr;
  for (std::size_t b = 0; b < batches; ++b) {
    const Batch drawn = sampler.draw(state.rng);
    const LossAndGradient lg = backward(state.params, drawn.samples, spec);
    sgd_step(state.params, lg.grads, lr);
    rec.mt_loss += lg.report.mt_loss;
    rec.ml_loss += lg.report.ml_loss;
    rec.total += lg.report.total;
  }
  const double n = static_cast<double>(batches);
  rec.mt_loss /= n;
  rec.ml_loss /= n;
  rec.total /= n;
  state.current_lr = lr;
  ++state.epoch;
  return rec;
}

AssociationRound associate(TrainState& state, const IcsDataset& dataset, int round) {
  state.multilabels = discover_all(state.params, dataset);
  AssociationRound r;
  r.round = round;
  r.pairs = state.multilabels.num_pairs();
  r.precision = association_precision(state.multilabels, dataset);
  r.rows = association_dump(state.multilabels, dataset, round);
  return r;
}

std::string iteration_tag(int iteration) {
  std::string n = std::to_string(iteration);
  if (n.size() < 2) n.insert(0, "0");
  return "iter_" + n;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(std::isfinite(lambda_ml) && lambda_ml >= 0.0)) fail(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (!positive(initial_lr) || !positive(ml_base_lr)) {
    fail(ErrorCode::kInvalidArgument, "learning rates must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "decay_factor must be in (0, 1]");
  }
  if (pretrain_epochs < 0 || pretrain_decay_every < 1 || ml_iterations < 0 || epochs_per_iteration < 1 ||
      ml_decay_after_epoch < 0 || persons_per_camera < 1 || images_per_person < 1) {
    fail(ErrorCode::kInvalidArgument, "schedule counts out of range");
  }
}

std::string_view to_string(Phase phase) noexcept {
  return phase == Phase::kPretrain ? "pretrain" : "ml";
}

double lr_schedule(const TrainConfig& config, Phase phase, int epoch_within_phase) {
  // Dividing by the inverse factor keeps decimal rates exact (0.05 -> 0.005,
  // not 0.005000000000000001).
  const double inverse = 1.0 / config.decay_factor;
  if (phase == Phase::kPretrain) {
    return config.initial_lr / std::pow(inverse, epoch_within_phase / config.pretrain_decay_every);
  }
  return epoch_within_phase >= config.ml_decay_after_epoch ? config.ml_base_lr / inverse : config.ml_base_lr;
}

void sgd_step(ModelParams& params, const GradientSet& grads, double lr) {
  if (!(std::isfinite(lr) && lr > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  auto weights = parameter_tensors(params);
  const auto deltas = parameter_tensors(grads);
  if (weights.size() != deltas.size()) fail(ErrorCode::kShapeError, "gradient/parameter layer count mismatch");
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (weights[t].size() != deltas[t].size()) fail(ErrorCode::kShapeError, "gradient/parameter shape mismatch");
    if (!finite_all(deltas[t])) fail(ErrorCode::kNumericFailure, "non-finite gradient; step aborted");
  }
  for (std::size_t t = 0; t < weights.size(); ++t) {
    for (std::size_t k = 0; k < weights[t].size(); ++k) weights[t][k] -= lr * deltas[t][k];
  }
}

ModelConfig fit_model_config(ModelConfig config, const IcsDataset& dataset) {
  config.input_dim = dataset.feature_dim;
  config.heads = dataset.identity_counts();
  return config;
}

TrainState pretrain_mt(const IcsDataset& dataset, const ModelConfig& model, const TrainConfig& config,
                       const TrainHooks& hooks) {
  config.validate();
  dataset.validate();
  TrainState state;
  state.params = init_params(model);
  check_compatible(state.params, dataset);
  state.rng.seed(config.seed);
  state.current_lr = config.initial_lr;

  const BatchSampler sampler(dataset, config.persons_per_camera, config.images_per_person);
  const LossSpec spec{config.lambda_ml, nullptr};
  for (int e = 0; e < config.pretrain_epochs; ++e) {
    EpochRecord rec = run_epoch(state, dataset, sampler, spec, lr_schedule(config, Phase::kPretrain, e));
    rec.phase = Phase::kPretrain;
    rec.epoch = e;
    state.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint("pretrain", state.params);
  return state;
}

TrainState train_mtml(const IcsDataset& dataset, const TrainConfig& config, TrainState state,
                      const TrainHooks& hooks) {
  config.validate();
  check_compatible(state.params, dataset);
  const BatchSampler sampler(dataset, config.persons_per_camera, config.images_per_person);

  if (!config.mt_only && config.initial_association) {
    state.rounds.push_back(associate(state, dataset, 0));
    if (hooks.on_association) hooks.on_association(state.rounds.back());
  }
  for (int it = 1; it <= config.ml_iterations; ++it) {
    state.iteration = it;
    const AugmentedLabels labels = apply_multilabels(dataset, state.multilabels);
    const LossSpec spec{config.lambda_ml, &labels};
    const std::size_t pairs = state.multilabels.num_pairs();
    const auto precision = association_precision(state.multilabels, dataset);
    for (int e = 0; e < config.epochs_per_iteration; ++e) {
      EpochRecord rec = run_epoch(state, dataset, sampler, spec, lr_schedule(config, Phase::kMultiLabel, e));
      rec.phase = Phase::kMultiLabel;
      rec.iteration = it;
      rec.epoch = e;
      rec.pairs_discovered = pairs;
      rec.association_precision = precision;
      state.history.push_back(rec);
      if (hooks.on_epoch) hooks.on_epoch(rec);
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(iteration_tag(it), state.params);
    if (!config.mt_only) {
      state.rounds.push_back(associate(state, dataset, it));
      if (hooks.on_association) hooks.on_association(state.rounds.back());
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint("final", state.params);
  return state;
}

std::vector<double> camera_accuracy(const ModelParams& params, const IcsDataset& dataset) {
  std::vector<double> acc;
  for (const auto& cam : dataset.cameras) {
    std::size_t hits = 0;
    for (const auto& s : cam.samples) {
      const Vector logits = head_logits(params, forward_shared(params, s.features), cam.camera_id);
      if (nominate(logits) == s.person_label) ++hits;
    }
    acc.push_back(cam.samples.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(cam.samples.size()));
  }
  return acc;
}

}  // namespace mtml
