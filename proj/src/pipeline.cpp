#include "mtml/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <regex>

#include "mtml/error.hpp"
#include "mtml/report.hpp"
#include "text.hpp"

namespace fs = std::filesystem;

namespace mtml {

namespace {

void require_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorCode::kIoError, "output directory '" + dir + "' does not exist");
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

}  // namespace

TrainRunResult run_training(const IcsDataset& dataset, const ModelConfig& model, const TrainConfig& config,
                            const std::string& out_dir, const LogFn& log) {
  require_dir(out_dir);
  TrainRunResult result;
  std::string metrics = metrics_csv_header();
  const std::string metrics_path = join(out_dir, "metrics.csv");

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& rec) {
    metrics += metrics_csv_row(rec);
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-8s it %d epoch %3d  lr %-8g L_mt %.5f  L_ml %.5f  L %.5f",
                    std::string(to_string(rec.phase)).c_str(), rec.iteration, rec.epoch, rec.lr, rec.mt_loss,
                    rec.ml_loss, rec.total);
      log(buf);
    }
  };
  hooks.on_checkpoint = [&](std::string_view tag, const ModelParams& params) {
    const std::string path = join(out_dir, "checkpoint_" + std::string(tag) + ".txt");
    save_checkpoint(params, path);
    text::write_file(metrics_path, metrics);
    result.last_checkpoint = path;
  };
  hooks.on_association = [&](const AssociationRound& round) {
    if (round.round >= 1) text::write_file(join(out_dir, association_dump_filename(round.round)), association_dump_csv(round.rows));
    if (log) {
      std::string line = "association round " + std::to_string(round.round) + ": " + std::to_string(round.pairs) + " pairs";
      if (round.precision) line += ", precision " + text::format_real(*round.precision);
      log(line);
    }
  };

  try {
    result.state = pretrain_mt(dataset, fit_model_config(model, dataset), config, hooks);
    result.state = train_mtml(dataset, config, std::move(result.state), hooks);
  } catch (const Error& e) {
    text::write_file(metrics_path, metrics);
    const std::string where =
        result.last_checkpoint.empty() ? " (no checkpoint written)" : " (last good checkpoint: " + result.last_checkpoint + ")";
    throw Error(e.code(), e.detail() + where);
  }
  text::write_file(metrics_path, metrics);
  return result;
}

EvalReport run_evaluation(const ModelParams& params, const IcsDataset& dataset, double probe_fraction,
                          std::uint64_t seed, const std::string& out_dir, bool dump_distances) {
  require_dir(out_dir);
  Matrix dist;
  const EvalReport report = evaluate_model(params, dataset, probe_fraction, seed, dump_distances ? &dist : nullptr);
  text::write_file(join(out_dir, "eval.csv"), eval_report_csv(report));
  text::write_file(join(out_dir, "eval.txt"), eval_report_table(report));
  if (dump_distances) text::write_file(join(out_dir, "distances.csv"), distance_matrix_csv(dist));
  return report;
}

std::vector<DynamicsRow> run_dynamics(const std::string& run_dir, const std::string& out_dir) {
  std::error_code ec;
  if (!fs::is_directory(run_dir, ec)) fail(ErrorCode::kMissingDumps, "run directory '" + run_dir + "' does not exist");
  require_dir(out_dir);
  static const std::regex pattern(R"(association_round_(\d+)\.csv)");
  std::vector<std::pair<int, fs::path>> dumps;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) dumps.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  if (dumps.empty()) fail(ErrorCode::kMissingDumps, "no association dumps in '" + run_dir + "'");
  std::sort(dumps.begin(), dumps.end());

  std::vector<int> rounds;
  std::vector<AssociationDumpRow> rows;
  for (const auto& [round, path] : dumps) {
    rounds.push_back(round);
    auto parsed = parse_association_dump(text::read_file(path.string(), ErrorCode::kIoError));
    for (const auto& r : parsed) {
      if (r.round != round) fail(ErrorCode::kParseError, path.string() + ": row for round " + std::to_string(r.round));
    }
    rows.insert(rows.end(), parsed.begin(), parsed.end());
  }
  auto report = association_dynamics_report(rows, rounds);
  text::write_file(join(out_dir, "dynamics.csv"), dynamics_csv(report));
  text::write_file(join(out_dir, "dynamics.txt"), dynamics_table(report));
  return report;
}

}  // namespace mtml
