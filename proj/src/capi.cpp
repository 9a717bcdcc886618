#include "mtml/mtml.h"

#include <algorithm>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "mtml/datagen.hpp"
#include "mtml/error.hpp"
#include "mtml/eval.hpp"
#include "mtml/model.hpp"
#include "mtml/pipeline.hpp"
#include "mtml/trainer.hpp"

struct mtml_dataset {
  mtml::IcsDataset value;
};

struct mtml_model {
  mtml::ModelParams value;
};

static_assert(static_cast<int>(mtml::ErrorCode::kInternal) == MTML_ERR_INTERNAL);
static_assert(static_cast<int>(mtml::ErrorCode::kMissingGroundTruth) == MTML_ERR_MISSING_GROUND_TRUTH);
static_assert(static_cast<int>(mtml::ErrorCode::kIncompatibleArtifacts) == MTML_ERR_INCOMPATIBLE_ARTIFACTS);

namespace {

thread_local std::string g_last_error;

mtml_status set_error(mtml_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
mtml_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MTML_OK;
  } catch (const mtml::Error& e) {
    return set_error(static_cast<mtml_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MTML_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MTML_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) mtml::fail(mtml::ErrorCode::kInvalidArgument, what);
}

mtml::SynthConfig to_cpp(const mtml_synth_config& c) {
  mtml::SynthConfig s;
  s.num_global_identities = c.num_global_identities;
  s.num_cameras = c.num_cameras;
  s.feature_dim = c.feature_dim;
  s.images_per_identity_per_camera = c.images_per_identity_per_camera;
  s.camera_presence_probability = c.camera_presence_probability;
  s.cluster_spread = c.cluster_spread;
  s.camera_shift_scale = c.camera_shift_scale;
  s.camera_distortion = c.camera_distortion;
  s.seed = c.seed;
  return s;
}

mtml::ModelConfig to_cpp(const mtml_model_config& c) {
  require(c.num_hidden >= 0 && c.num_hidden <= MTML_MAX_HIDDEN_LAYERS, "num_hidden out of range");
  mtml::ModelConfig m;
  m.hidden_dims.assign(c.hidden_dims, c.hidden_dims + c.num_hidden);
  m.feature_dim = c.feature_dim;
  m.init_scale = c.init_scale;
  m.seed = c.seed;
  return m;
}

mtml::TrainConfig to_cpp(const mtml_train_config& c) {
  mtml::TrainConfig t;
  t.lambda_ml = c.lambda_ml;
  t.initial_lr = c.initial_lr;
  t.pretrain_epochs = c.pretrain_epochs;
  t.pretrain_decay_every = c.pretrain_decay_every;
  t.decay_factor = c.decay_factor;
  t.ml_iterations = c.ml_iterations;
  t.epochs_per_iteration = c.epochs_per_iteration;
  t.ml_decay_after_epoch = c.ml_decay_after_epoch;
  t.ml_base_lr = c.ml_base_lr;
  t.persons_per_camera = c.persons_per_camera;
  t.images_per_person = c.images_per_person;
  t.initial_association = c.initial_association != 0;
  t.mt_only = c.mt_only != 0;
  t.seed = c.seed;
  return t;
}

}  // namespace

extern "C" {

const char* mtml_last_error(void) { return g_last_error.c_str(); }

const char* mtml_status_string(mtml_status status) {
  return mtml::to_string(static_cast<mtml::ErrorCode>(status)).data();
}

const char* mtml_version(void) { return "1.0.0"; }

void mtml_synth_config_default(mtml_synth_config* config) {
  if (!config) return;
  const mtml::SynthConfig d;
  *config = mtml_synth_config{d.num_global_identities, d.num_cameras, d.feature_dim,
                              d.images_per_identity_per_camera, d.camera_presence_probability, d.cluster_spread,
                              d.camera_shift_scale, d.camera_distortion, d.seed};
}

void mtml_model_config_default(mtml_model_config* config) {
  if (!config) return;
  const mtml::ModelConfig d;
  *config = mtml_model_config{};
  config->num_hidden = static_cast<int>(d.hidden_dims.size());
  for (std::size_t i = 0; i < d.hidden_dims.size(); ++i) config->hidden_dims[i] = d.hidden_dims[i];
  config->feature_dim = d.feature_dim;
  config->init_scale = d.init_scale;
  config->seed = d.seed;
}

void mtml_train_config_default(mtml_train_config* config) {
  if (!config) return;
  const mtml::TrainConfig d;
  *config = mtml_train_config{d.lambda_ml,
                              d.initial_lr,
                              d.pretrain_epochs,
                              d.pretrain_decay_every,
                              d.decay_factor,
                              d.ml_iterations,
                              d.epochs_per_iteration,
                              d.ml_decay_after_epoch,
                              d.ml_base_lr,
                              d.persons_per_camera,
                              d.images_per_person,
                              d.initial_association ? 1 : 0,
                              d.mt_only ? 1 : 0,
                              d.seed};
}

mtml_status mtml_dataset_generate(const mtml_synth_config* config, mtml_dataset** out) {
  return guarded([&] {
    require(config && out, "null argument");
    *out = new mtml_dataset{mtml::generate_synthetic(to_cpp(*config))};
  });
}

mtml_status mtml_dataset_generate_split(const mtml_synth_config* config, int test_identities,
                                        mtml_dataset** train_out, mtml_dataset** test_out) {
  return guarded([&] {
    require(config && train_out && test_out, "null argument");
    auto split = mtml::generate_synthetic_split(to_cpp(*config), test_identities);
    auto train = std::make_unique<mtml_dataset>(mtml_dataset{std::move(split.train)});
    auto test = std::make_unique<mtml_dataset>(mtml_dataset{std::move(split.test)});
    *train_out = train.release();
    *test_out = test.release();
  });
}

mtml_status mtml_dataset_load(const char* path, mtml_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new mtml_dataset{mtml::load_dataset(path)};
  });
}

mtml_status mtml_dataset_save(const mtml_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset && path, "null argument");
    mtml::save_dataset(dataset->value, path);
  });
}

void mtml_dataset_free(mtml_dataset* dataset) { delete dataset; }

int mtml_dataset_num_cameras(const mtml_dataset* dataset) { return dataset ? dataset->value.num_cameras : 0; }

int mtml_dataset_feature_dim(const mtml_dataset* dataset) { return dataset ? dataset->value.feature_dim : 0; }

size_t mtml_dataset_num_samples(const mtml_dataset* dataset) { return dataset ? dataset->value.num_samples() : 0; }

int mtml_dataset_has_ground_truth(const mtml_dataset* dataset) {
  return dataset && dataset->value.ground_truth ? 1 : 0;
}

mtml_status mtml_dataset_camera_info(const mtml_dataset* dataset, int camera_id, int* num_identities,
                                     size_t* num_samples) {
  return guarded([&] {
    require(dataset != nullptr, "null dataset");
    const auto& cam = dataset->value.camera(camera_id);
    if (num_identities) *num_identities = cam.num_identities;
    if (num_samples) *num_samples = cam.samples.size();
  });
}

mtml_status mtml_train(const mtml_dataset* dataset, const mtml_model_config* model_config,
                       const mtml_train_config* train_config, const char* out_dir, mtml_log_fn log, void* log_user,
                       mtml_model** out_model, mtml_train_summary* summary) {
  return guarded([&] {
    require(dataset && model_config && train_config && out_dir, "null argument");
    const auto model = mtml::fit_model_config(to_cpp(*model_config), dataset->value);
    mtml::LogFn sink;
    if (log) sink = [log, log_user](std::string_view line) { log(std::string(line).c_str(), log_user); };
    auto run = mtml::run_training(dataset->value, model, to_cpp(*train_config), out_dir, sink);
    if (summary) {
      *summary = mtml_train_summary{};
      summary->epochs_run = run.state.epoch;
      for (const auto& r : run.state.rounds) {
        if (r.round >= 1) ++summary->association_rounds;
      }
      summary->final_pairs = run.state.multilabels.num_pairs();
      const auto precision = mtml::association_precision(run.state.multilabels, dataset->value);
      summary->final_precision = precision ? *precision : -1.0;
      if (!run.state.history.empty()) {
        summary->final_mt_loss = run.state.history.back().mt_loss;
        summary->final_ml_loss = run.state.history.back().ml_loss;
      }
    }
    if (out_model) *out_model = new mtml_model{std::move(run.state.params)};
  });
}

mtml_status mtml_model_load(const char* path, mtml_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new mtml_model{mtml::load_checkpoint(path)};
  });
}

mtml_status mtml_model_save(const mtml_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    mtml::save_checkpoint(model->value, path);
  });
}

void mtml_model_free(mtml_model* model) { delete model; }

int mtml_model_input_dim(const mtml_model* model) { return model ? model->value.config.input_dim : 0; }

int mtml_model_feature_dim(const mtml_model* model) { return model ? model->value.config.feature_dim : 0; }

int mtml_model_num_heads(const mtml_model* model) { return model ? model->value.num_heads() : 0; }

mtml_status mtml_model_extract_features(const mtml_model* model, const double* features, size_t count,
                                        double* out) {
  return guarded([&] {
    require(model && (count == 0 || (features && out)), "null argument");
    const auto in = static_cast<std::size_t>(model->value.config.input_dim);
    const auto d = static_cast<std::size_t>(model->value.config.feature_dim);
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = mtml::forward_shared(model->value, std::span<const double>(features + i * in, in));
      std::copy(v.begin(), v.end(), out + i * d);
    }
  });
}

mtml_status mtml_evaluate(const mtml_model* model, const mtml_dataset* dataset, double probe_fraction,
                          uint64_t seed, const char* out_dir, int dump_distances, mtml_eval_report* out) {
  return guarded([&] {
    require(model && dataset && out_dir, "null argument");
    const auto report =
        mtml::run_evaluation(model->value, dataset->value, probe_fraction, seed, out_dir, dump_distances != 0);
    if (out) {
      auto rate = [&](int r) {
        auto it = report.cmc.find(r);
        return it == report.cmc.end() ? 0.0 : it->second;
      };
      *out = mtml_eval_report{rate(1), rate(5), rate(10), rate(20), report.map_score, report.num_probes_evaluated,
                              report.num_probes_excluded};
    }
  });
}

mtml_status mtml_dynamics(const char* run_dir, const char* out_dir, mtml_dynamics_row* rows, size_t capacity,
                          size_t* count) {
  return guarded([&] {
    require(run_dir && out_dir, "null argument");
    const auto report = mtml::run_dynamics(run_dir, out_dir);
    if (count) *count = report.size();
    if (rows) {
      for (std::size_t i = 0; i < report.size() && i < capacity; ++i) {
        rows[i] = mtml_dynamics_row{report[i].round, report[i].pairs,
                                    report[i].precision ? *report[i].precision : -1.0};
      }
    }
  });
}

}  // extern "C"
