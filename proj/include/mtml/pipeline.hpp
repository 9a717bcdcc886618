#pragma once

// File-producing drivers behind the CLI subcommands.

#include <functional>
#include <string>
#include <string_view>

#include "mtml/eval.hpp"
#include "mtml/trainer.hpp"

namespace mtml {

using LogFn = std::function<void(std::string_view line)>;

// Output directory layout of a training run:
//   metrics.csv                     one row per epoch
//   checkpoint_pretrain.txt         end of MT pretraining
//   checkpoint_iter_NN.txt          end of each ML iteration's training
//   checkpoint_final.txt
//   association_round_NN.csv        association computed after iteration NN
struct TrainRunResult {
  TrainState state;
  std::string last_checkpoint;
};

// Throws Error; the message names the last checkpoint written, if any.
TrainRunResult run_training(const IcsDataset& dataset, const ModelConfig& model, const TrainConfig& config,
                            const std::string& out_dir, const LogFn& log = {});

// Writes eval.csv, eval.txt and (optionally) distances.csv into out_dir.
EvalReport run_evaluation(const ModelParams& params, const IcsDataset& dataset, double probe_fraction,
                          std::uint64_t seed, const std::string& out_dir, bool dump_distances);

// Reads every association_round_NN.csv in run_dir and writes
// dynamics.csv and dynamics.txt into out_dir. Throws kMissingDumps when none exist.
std::vector<DynamicsRow> run_dynamics(const std::string& run_dir, const std::string& out_dir);

}  // namespace mtml
