#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "mtml/trainer.hpp"
#include "oracles.hpp"

using mtml::ErrorCode;
using mtml::Phase;
using oracle::error_of;

namespace {

mtml::TrainConfig quick_config() {
  mtml::TrainConfig c;
  c.pretrain_epochs = 12;
  c.pretrain_decay_every = 5;
  c.ml_iterations = 2;
  c.epochs_per_iteration = 4;
  c.ml_decay_after_epoch = 2;
  return c;
}

mtml::IcsDataset easy_dataset(int cameras, std::uint64_t seed = 1) {
  mtml::SynthConfig s;
  s.num_global_identities = 8;
  s.num_cameras = cameras;
  s.camera_presence_probability = 1.0;
  s.cluster_spread = 0.2;
  s.camera_shift_scale = 0.3;
  s.seed = seed;
  return mtml::generate_synthetic(s);
}

mtml::ModelConfig model_for(const mtml::IcsDataset& ds) {
  mtml::ModelConfig m;
  m.hidden_dims = {32};
  m.feature_dim = 16;
  return mtml::fit_model_config(m, ds);
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const mtml::TrainConfig c;
  CHECK(mtml::lr_schedule(c, Phase::kPretrain, 0) == 0.05);
  CHECK(mtml::lr_schedule(c, Phase::kPretrain, 39) == 0.05);
  CHECK(mtml::lr_schedule(c, Phase::kPretrain, 40) == 0.005);
  CHECK(mtml::lr_schedule(c, Phase::kPretrain, 80) == 0.0005);
  CHECK(mtml::lr_schedule(c, Phase::kPretrain, 99) == 0.0005);
  CHECK(mtml::lr_schedule(c, Phase::kMultiLabel, 0) == 0.005);
  CHECK(mtml::lr_schedule(c, Phase::kMultiLabel, 7) == 0.005);
  CHECK(mtml::lr_schedule(c, Phase::kMultiLabel, 8) == 0.0005);
  CHECK(mtml::lr_schedule(c, Phase::kMultiLabel, 9) == 0.0005);
  CHECK(mtml::lr_schedule(c, Phase::kMultiLabel, 14) == 0.0005);

  mtml::TrainConfig flat;
  flat.decay_factor = 1.0;
  for (int e = 0; e < 100; ++e) CHECK(mtml::lr_schedule(flat, Phase::kPretrain, e) == 0.05);
  CHECK(to_string(Phase::kPretrain) == "pretrain");
  CHECK(to_string(Phase::kMultiLabel) == "ml");
}

TEST_CASE("train config validation") {
  mtml::TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.initial_lr = 0.0;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c = {};
  c.persons_per_camera = 0;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c = {};
  c.decay_factor = 1.5;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("sgd step") {
  mtml::ModelConfig mc;
  mc.input_dim = 1;
  mc.hidden_dims = {};
  mc.feature_dim = 1;
  mc.heads = {1};
  mc.init_scale = 0.0;
  auto p = mtml::init_params(mc);
  p.encoder[0].w(0, 0) = 1.0;
  auto g = mtml::zero_gradients(p);
  g.encoder[0].w(0, 0) = 0.5;
  mtml::sgd_step(p, g, 0.1);
  CHECK(p.encoder[0].w(0, 0) == 0.95);

  const auto before = p;
  mtml::sgd_step(p, mtml::zero_gradients(p), 0.1);
  CHECK(p == before);

  g.heads[0].bias[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_of([&] { mtml::sgd_step(p, g, 0.1); }) == ErrorCode::kNumericFailure);
  CHECK(p == before);
}

TEST_CASE("pretraining logs MT only and follows the schedule") {
  const auto ds = easy_dataset(3);
  const auto cfg = quick_config();
  std::vector<std::string> tags;
  mtml::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::string_view tag, const mtml::ModelParams&) { tags.emplace_back(tag); };
  const auto state = mtml::pretrain_mt(ds, model_for(ds), cfg, hooks);
  REQUIRE(state.history.size() == 12);
  for (std::size_t e = 0; e < state.history.size(); ++e) {
    const auto& r = state.history[e];
    CHECK(r.phase == Phase::kPretrain);
    CHECK(r.epoch == static_cast<int>(e));
    CHECK(r.ml_loss == 0.0);
    CHECK(r.total == r.mt_loss);
    CHECK(r.lr == mtml::lr_schedule(cfg, Phase::kPretrain, static_cast<int>(e)));
  }
  CHECK(state.epoch == 12);
  CHECK(tags == std::vector<std::string>{"pretrain"});
}

TEST_CASE("initial loss of a near-zero model is close to mean ln N") {
  const auto ds = easy_dataset(3);
  auto m = model_for(ds);
  m.init_scale = 1e-3;
  auto cfg = quick_config();
  cfg.pretrain_epochs = 1;
  const auto state = mtml::pretrain_mt(ds, m, cfg);
  double expected = 0.0;
  for (int n : ds.identity_counts()) expected += std::log(static_cast<double>(n));
  expected /= ds.num_cameras;
  CHECK(std::abs(state.history[0].mt_loss - expected) / expected < 0.05);
}

TEST_CASE("pretraining separates easy data and is deterministic") {
  const auto ds = easy_dataset(3);
  auto cfg = quick_config();
  cfg.pretrain_epochs = 40;
  cfg.pretrain_decay_every = 30;
  const auto a = mtml::pretrain_mt(ds, model_for(ds), cfg);
  const auto b = mtml::pretrain_mt(ds, model_for(ds), cfg);
  CHECK(a.params == b.params);
  for (double acc : mtml::camera_accuracy(a.params, ds)) CHECK(acc >= 0.95);
}

TEST_CASE("association on a well-separated two-camera model recovers the truth") {
  const auto ds = easy_dataset(2, 3);
  auto cfg = quick_config();
  cfg.pretrain_epochs = 40;
  cfg.pretrain_decay_every = 30;
  const auto state = mtml::pretrain_mt(ds, model_for(ds), cfg);
  const auto set = mtml::discover_all(state.params, ds);
  std::set<mtml::AssociatedPair> truth;
  for (int a = 0; a < ds.cameras[0].num_identities; ++a) {
    for (int b = 0; b < ds.cameras[1].num_identities; ++b) {
      if (ds.ground_truth->at({1, a}) == ds.ground_truth->at({2, b})) truth.insert(mtml::AssociatedPair{{1, a}, {2, b}});
    }
  }
  const auto got = set.pairs();
  CHECK(std::set<mtml::AssociatedPair>(got.begin(), got.end()) == truth);
}

TEST_CASE("multi-label phase bookkeeping") {
  const auto ds = easy_dataset(3);
  const auto cfg = quick_config();
  std::vector<std::string> tags;
  std::vector<int> rounds;
  mtml::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::string_view tag, const mtml::ModelParams&) { tags.emplace_back(tag); };
  hooks.on_association = [&](const mtml::AssociationRound& r) { rounds.push_back(r.round); };
  auto state = mtml::pretrain_mt(ds, model_for(ds), cfg);
  const std::size_t pre = state.history.size();
  state = mtml::train_mtml(ds, cfg, std::move(state), hooks);
  CHECK(state.history.size() == pre + 2 * 4);
  CHECK(tags == std::vector<std::string>{"iter_01", "iter_02", "final"});
  CHECK(rounds == std::vector<int>{0, 1, 2});
  REQUIRE(state.rounds.size() == 3);
  for (const auto& r : state.rounds) {
    CHECK(r.rows.size() == r.pairs);
    CHECK(r.precision.has_value());
  }
  for (std::size_t i = pre; i < state.history.size(); ++i) {
    const auto& r = state.history[i];
    CHECK(r.phase == Phase::kMultiLabel);
    CHECK(r.iteration == static_cast<int>((i - pre) / 4) + 1);
    CHECK(r.lr == mtml::lr_schedule(cfg, Phase::kMultiLabel, r.epoch));
    CHECK(r.pairs_discovered == state.rounds[static_cast<std::size_t>(r.iteration - 1)].pairs);
  }
  CHECK(state.multilabels.num_pairs() == state.rounds.back().pairs);
}

TEST_CASE("without the initial pass the first round trains on an empty set") {
  const auto ds = easy_dataset(3);
  auto cfg = quick_config();
  cfg.initial_association = false;
  auto state = mtml::train_mtml(ds, cfg, mtml::pretrain_mt(ds, model_for(ds), cfg));
  REQUIRE(state.rounds.size() == 2);
  CHECK(state.rounds.front().round == 1);
  const auto first = state.history.size() - 8;
  for (std::size_t i = first; i < first + 4; ++i) {
    CHECK(state.history[i].ml_loss == 0.0);
    CHECK(state.history[i].pairs_discovered == 0);
  }
}

TEST_CASE("lambda zero reproduces the MT-only continuation") {
  const auto ds = easy_dataset(3);
  auto cfg = quick_config();
  const auto pre = mtml::pretrain_mt(ds, model_for(ds), cfg);
  cfg.lambda_ml = 0.0;
  const auto inert = mtml::train_mtml(ds, cfg, pre);
  cfg.mt_only = true;
  const auto mt = mtml::train_mtml(ds, cfg, pre);
  CHECK(inert.params == mt.params);
  REQUIRE(inert.history.size() == mt.history.size());
  for (std::size_t i = 0; i < mt.history.size(); ++i) {
    CHECK(inert.history[i].mt_loss == mt.history[i].mt_loss);
    CHECK(mt.history[i].ml_loss == 0.0);
  }
  CHECK(mt.rounds.empty());
  CHECK(mt.multilabels.empty());
}

TEST_CASE("full training is deterministic") {
  const auto ds = easy_dataset(3);
  const auto cfg = quick_config();
  const auto a = mtml::train_mtml(ds, cfg, mtml::pretrain_mt(ds, model_for(ds), cfg));
  const auto b = mtml::train_mtml(ds, cfg, mtml::pretrain_mt(ds, model_for(ds), cfg));
  CHECK(a.params == b.params);
  CHECK(a.multilabels == b.multilabels);
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].total == b.history[i].total);
}

TEST_CASE("model config is fitted to the dataset") {
  const auto ds = easy_dataset(3);
  const auto m = model_for(ds);
  CHECK(m.input_dim == ds.feature_dim);
  CHECK(m.heads == ds.identity_counts());
}
