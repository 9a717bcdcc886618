// mtml command-line front end. Links only the C API.
//
//   mtml generate --out train.csv --test-out test.csv [synthetic flags]
//   mtml train    --dataset train.csv --out-dir run/ [model/training flags]
//   mtml eval     --checkpoint run/checkpoint_final.txt --dataset test.csv --out-dir eval/
//   mtml dynamics --run-dir run/
//
// Any flag can also come from a TOML/INI file given with --config; flags on
// the command line win. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtml/mtml.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int runtime_error(mtml_status status, const char* what) {
  std::fprintf(stderr, "mtml: %s failed (%s): %s\n", what, mtml_status_string(status), mtml_last_error());
  return kExitRuntime;
}

bool echo_config(const CLI::App& app, const std::string& dir, const std::string& name) {
  std::ofstream out(std::filesystem::path(dir) / name, std::ios::trunc);
  if (!out) return false;
  // Sectioned so the file can be passed straight back through --config.
  out << '[' << app.get_name() << "]\n" << app.config_to_str(true, false);
  return static_cast<bool>(out);
}

void log_line(const char* line, void* user) {
  if (user == nullptr) std::fprintf(stderr, "%s\n", line);
}

struct GenerateArgs {
  mtml_synth_config synth{};
  std::string out;
  std::string test_out;
  int test_identities = 0;
};

struct TrainArgs {
  mtml_model_config model{};
  mtml_train_config train{};
  std::vector<int> hidden;
  std::string dataset;
  std::string out_dir;
  bool mt_only = false;
  bool no_initial_association = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out_dir;
  double probe_fraction = 0.25;
  std::uint64_t seed = 0;
  bool dump_distances = false;
};

struct DynamicsArgs {
  std::string run_dir;
  std::string out_dir;
};

int print_dataset_summary(const mtml_dataset* ds, const char* label) {
  const int m = mtml_dataset_num_cameras(ds);
  std::printf("%s: M=%d F=%d samples=%zu\n", label, m, mtml_dataset_feature_dim(ds), mtml_dataset_num_samples(ds));
  for (int p = 1; p <= m; ++p) {
    int n = 0;
    size_t count = 0;
    if (auto st = mtml_dataset_camera_info(ds, p, &n, &count); st != MTML_OK) return runtime_error(st, "camera info");
    std::printf("  camera %d: N_p=%d samples=%zu\n", p, n, count);
  }
  return 0;
}

int cmd_generate(const CLI::App& app, GenerateArgs& a) {
  mtml_dataset* train = nullptr;
  mtml_dataset* test = nullptr;
  mtml_status st = MTML_OK;
  if (a.test_out.empty()) {
    st = mtml_dataset_generate(&a.synth, &train);
  } else {
    const int t = a.test_identities > 0 ? a.test_identities : a.synth.num_global_identities;
    st = mtml_dataset_generate_split(&a.synth, t, &train, &test);
  }
  if (st != MTML_OK) return runtime_error(st, "generate");
  int rc = 0;
  if ((st = mtml_dataset_save(train, a.out.c_str())) != MTML_OK) {
    rc = runtime_error(st, "save dataset");
  } else if (test && (st = mtml_dataset_save(test, a.test_out.c_str())) != MTML_OK) {
    rc = runtime_error(st, "save test dataset");
  } else {
    rc = print_dataset_summary(train, a.out.c_str());
    if (rc == 0 && test) rc = print_dataset_summary(test, a.test_out.c_str());
    const auto dir = std::filesystem::absolute(a.out).parent_path().string();
    if (rc == 0 && !echo_config(app, dir, "generate_config.toml")) {
      std::fprintf(stderr, "mtml: cannot write effective config into %s\n", dir.c_str());
      rc = kExitRuntime;
    }
  }
  mtml_dataset_free(train);
  mtml_dataset_free(test);
  return rc;
}

int cmd_train(const CLI::App& app, TrainArgs& a) {
  if (a.hidden.size() > MTML_MAX_HIDDEN_LAYERS) {
    std::fprintf(stderr, "mtml: at most %d hidden layers\n", MTML_MAX_HIDDEN_LAYERS);
    return kExitUsage;
  }
  a.model.num_hidden = static_cast<int>(a.hidden.size());
  for (std::size_t i = 0; i < a.hidden.size(); ++i) a.model.hidden_dims[i] = a.hidden[i];
  a.train.mt_only = a.mt_only ? 1 : 0;
  a.train.initial_association = a.no_initial_association ? 0 : 1;

  if (!std::filesystem::is_directory(a.out_dir)) {
    std::fprintf(stderr, "mtml: output directory %s does not exist\n", a.out_dir.c_str());
    return kExitRuntime;
  }
  mtml_dataset* ds = nullptr;
  if (auto st = mtml_dataset_load(a.dataset.c_str(), &ds); st != MTML_OK) return runtime_error(st, "load dataset");
  if (!echo_config(app, a.out_dir, "train_config.toml")) {
    std::fprintf(stderr, "mtml: cannot write effective config into %s\n", a.out_dir.c_str());
    mtml_dataset_free(ds);
    return kExitRuntime;
  }
  mtml_train_summary summary{};
  static int quiet_token = 0;
  const mtml_status st = mtml_train(ds, &a.model, &a.train, a.out_dir.c_str(), log_line,
                                    a.quiet ? &quiet_token : nullptr, nullptr, &summary);
  mtml_dataset_free(ds);
  if (st != MTML_OK) return runtime_error(st, "train");
  std::printf("epochs: %d  association rounds: %d  final pairs: %zu", summary.epochs_run, summary.association_rounds,
              summary.final_pairs);
  if (summary.final_precision >= 0.0) std::printf("  precision: %.4f", summary.final_precision);
  std::printf("\nfinal L_mt %.6f  L_ml %.6f\noutputs in %s\n", summary.final_mt_loss, summary.final_ml_loss,
              a.out_dir.c_str());
  return 0;
}

int cmd_eval(const CLI::App& app, EvalArgs& a) {
  if (!std::filesystem::is_directory(a.out_dir)) {
    std::fprintf(stderr, "mtml: output directory %s does not exist\n", a.out_dir.c_str());
    return kExitRuntime;
  }
  mtml_model* model = nullptr;
  mtml_dataset* ds = nullptr;
  if (auto st = mtml_model_load(a.checkpoint.c_str(), &model); st != MTML_OK) return runtime_error(st, "load checkpoint");
  if (auto st = mtml_dataset_load(a.dataset.c_str(), &ds); st != MTML_OK) {
    mtml_model_free(model);
    return runtime_error(st, "load dataset");
  }
  mtml_eval_report report{};
  const mtml_status st =
      mtml_evaluate(model, ds, a.probe_fraction, a.seed, a.out_dir.c_str(), a.dump_distances ? 1 : 0, &report);
  mtml_model_free(model);
  mtml_dataset_free(ds);
  if (st != MTML_OK) return runtime_error(st, "eval");
  if (!echo_config(app, a.out_dir, "eval_config.toml")) {
    std::fprintf(stderr, "mtml: cannot write effective config into %s\n", a.out_dir.c_str());
    return kExitRuntime;
  }
  std::printf("      R1      R5     R10     R20     mAP\n%8.1f%8.1f%8.1f%8.1f%8.1f\n", 100.0 * report.r1,
              100.0 * report.r5, 100.0 * report.r10, 100.0 * report.r20, 100.0 * report.map_score);
  std::printf("probes evaluated: %d (excluded: %d)\n", report.num_probes_evaluated, report.num_probes_excluded);
  return 0;
}

int cmd_dynamics(const CLI::App& app, DynamicsArgs& a) {
  const std::string out_dir = a.out_dir.empty() ? a.run_dir : a.out_dir;
  size_t count = 0;
  if (auto st = mtml_dynamics(a.run_dir.c_str(), out_dir.c_str(), nullptr, 0, &count); st != MTML_OK) {
    return runtime_error(st, "dynamics");
  }
  std::vector<mtml_dynamics_row> rows(count);
  if (auto st = mtml_dynamics(a.run_dir.c_str(), out_dir.c_str(), rows.data(), rows.size(), &count); st != MTML_OK) {
    return runtime_error(st, "dynamics");
  }
  if (!echo_config(app, out_dir, "dynamics_config.toml")) {
    std::fprintf(stderr, "mtml: cannot write effective config into %s\n", out_dir.c_str());
    return kExitRuntime;
  }
  std::printf("round     pairs  precision\n");
  for (const auto& r : rows) {
    if (r.precision >= 0.0) {
      std::printf("%5d  %8zu  %9.4f\n", r.round, r.pairs, r.precision);
    } else {
      std::printf("%5d  %8zu  %9s\n", r.round, r.pairs, "-");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task multi-label learning for intra-camera supervised re-identification"};
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mtml_version()));

  GenerateArgs gen;
  mtml_synth_config_default(&gen.synth);
  auto* g = app.add_subcommand("generate", "Generate a synthetic ICS dataset (and optional held-out split)");
  g->add_option("--out", gen.out, "Training dataset file")->required();
  g->add_option("--test-out", gen.test_out, "Held-out dataset file with fresh identities");
  g->add_option("--test-identities", gen.test_identities, "Held-out identity count (default: --identities)");
  g->add_option("--identities", gen.synth.num_global_identities, "Global identities G")->capture_default_str();
  g->add_option("--cameras", gen.synth.num_cameras, "Camera views M")->capture_default_str();
  g->add_option("--feature-dim", gen.synth.feature_dim, "Feature length F")->capture_default_str();
  g->add_option("--images-per-identity", gen.synth.images_per_identity_per_camera, "Images per identity per camera")
      ->capture_default_str();
  g->add_option("--presence", gen.synth.camera_presence_probability, "Probability an identity appears in a camera")
      ->capture_default_str();
  g->add_option("--spread", gen.synth.cluster_spread, "Within-identity noise scale")->capture_default_str();
  g->add_option("--camera-shift", gen.synth.camera_shift_scale, "Per-camera offset scale")->capture_default_str();
  g->add_option("--camera-distortion", gen.synth.camera_distortion, "Per-camera linear distortion scale")
      ->capture_default_str();
  g->add_option("--seed", gen.synth.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  mtml_model_config_default(&tr.model);
  mtml_train_config_default(&tr.train);
  tr.hidden.assign(tr.model.hidden_dims, tr.model.hidden_dims + tr.model.num_hidden);
  auto* t = app.add_subcommand("train", "MT pretraining followed by multi-label rounds");
  t->add_option("--dataset", tr.dataset, "Training dataset file")->required();
  t->add_option("--out-dir", tr.out_dir, "Existing directory for metrics, checkpoints and dumps")->required();
  t->add_option("--hidden", tr.hidden, "Encoder hidden widths")->capture_default_str()->expected(0, MTML_MAX_HIDDEN_LAYERS);
  t->add_option("--feature-dim", tr.model.feature_dim, "Shared feature dimension d")->capture_default_str();
  t->add_option("--init-scale", tr.model.init_scale, "Weight init scale")->capture_default_str();
  t->add_option("--model-seed", tr.model.seed, "Initialisation seed")->capture_default_str();
  t->add_option("--lambda", tr.train.lambda_ml, "ML loss weight")->capture_default_str();
  t->add_option("--lr", tr.train.initial_lr, "Pretraining learning rate")->capture_default_str();
  t->add_option("--pretrain-epochs", tr.train.pretrain_epochs, "Pretraining epochs")->capture_default_str();
  t->add_option("--pretrain-decay-every", tr.train.pretrain_decay_every, "Pretraining decay period (epochs)")
      ->capture_default_str();
  t->add_option("--decay-factor", tr.train.decay_factor, "Learning-rate decay factor")->capture_default_str();
  t->add_option("--ml-iterations", tr.train.ml_iterations, "Multi-label rounds")->capture_default_str();
  t->add_option("--epochs-per-iteration", tr.train.epochs_per_iteration, "Epochs per round")->capture_default_str();
  t->add_option("--ml-decay-after", tr.train.ml_decay_after_epoch, "Decay epoch within a round (0-based)")
      ->capture_default_str();
  t->add_option("--ml-lr", tr.train.ml_base_lr, "Learning rate at the start of each round")->capture_default_str();
  t->add_option("--persons-per-camera", tr.train.persons_per_camera, "Identities per camera per batch")
      ->capture_default_str();
  t->add_option("--images-per-person", tr.train.images_per_person, "Images per identity per batch")
      ->capture_default_str();
  t->add_option("--seed", tr.train.seed, "Sampling seed")->capture_default_str();
  t->add_flag("--mt-only", tr.mt_only, "Skip association (MT ablation arm)");
  t->add_flag("--no-initial-association", tr.no_initial_association,
              "Start the first round with an empty label set");
  t->add_flag("--quiet", tr.quiet, "Suppress per-epoch log lines");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Retrieval evaluation of a checkpoint on a held-out dataset");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--dataset", ev.dataset, "Held-out dataset file with ground truth")->required();
  e->add_option("--out-dir", ev.out_dir, "Existing directory for eval.csv / eval.txt")->required();
  e->add_option("--probe-fraction", ev.probe_fraction, "Fraction of each identity's images used as probes")
      ->capture_default_str();
  e->add_option("--seed", ev.seed, "Probe selection seed")->capture_default_str();
  e->add_flag("--dump-distances", ev.dump_distances, "Also write distances.csv");

  DynamicsArgs dy;
  auto* d = app.add_subcommand("dynamics", "Per-round association count and precision of a training run");
  d->add_option("--run-dir", dy.run_dir, "Training output directory")->required();
  d->add_option("--out-dir", dy.out_dir, "Where to write dynamics.csv / dynamics.txt (default: run dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& s) {
    return app.exit(s);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  if (*g) return cmd_generate(*g, gen);
  if (*t) return cmd_train(*t, tr);
  if (*e) return cmd_eval(*e, ev);
  if (*d) return cmd_dynamics(*d, dy);
  return kExitUsage;
}
