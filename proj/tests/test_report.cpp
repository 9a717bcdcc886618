#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mtml/pipeline.hpp"
#include "mtml/report.hpp"
#include "oracles.hpp"

using mtml::ErrorCode;
using oracle::error_of;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

mtml::TrainConfig tiny_schedule() {
  mtml::TrainConfig c;
  c.pretrain_epochs = 6;
  c.pretrain_decay_every = 3;
  c.ml_iterations = 2;
  c.epochs_per_iteration = 3;
  c.ml_decay_after_epoch = 1;
  return c;
}

}  // namespace

TEST_CASE("metrics CSV carries a version banner and round-trips") {
  const auto header = mtml::metrics_csv_header();
  CHECK(header.rfind("# mtml-metrics v1\n", 0) == 0);
  CHECK(header.find("phase,iteration,epoch,lr,mt_loss,ml_loss,total,pairs_discovered,association_precision") !=
        std::string::npos);
  mtml::EpochRecord a;
  a.lr = 0.005;
  a.mt_loss = 1.0 / 3.0;
  a.total = 1.0 / 3.0;
  mtml::EpochRecord b{mtml::Phase::kMultiLabel, 2, 7, 0.0005, 0.25, 0.1, 0.3, 17, 0.9411764705882353};
  const auto text = header + mtml::metrics_csv_row(a) + mtml::metrics_csv_row(b);
  CHECK(mtml::metrics_csv_row(a).find(",0.005,") != std::string::npos);
  const auto rows = mtml::parse_metrics_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].phase == "pretrain");
  CHECK(rows[0].lr == 0.005);
  CHECK(rows[0].mt_loss == 1.0 / 3.0);
  CHECK_FALSE(rows[0].association_precision.has_value());
  CHECK(rows[1].phase == "ml");
  CHECK(rows[1].iteration == 2);
  CHECK(rows[1].epoch == 7);
  CHECK(rows[1].pairs_discovered == 17);
  CHECK(*rows[1].association_precision == 0.9411764705882353);
  CHECK(error_of([] { mtml::parse_metrics_csv("garbage\n"); }) == ErrorCode::kParseError);
}

TEST_CASE("association dumps round-trip") {
  using mtml::PairCorrectness;
  const std::vector<mtml::AssociationDumpRow> rows{{3, 1, 0, 2, 4, PairCorrectness::kCorrect},
                                                   {3, 1, 2, 3, 1, PairCorrectness::kIncorrect},
                                                   {3, 2, 1, 3, 0, PairCorrectness::kUnknown}};
  const auto text = mtml::association_dump_csv(rows);
  CHECK(text.rfind("# mtml-association v1\n", 0) == 0);
  CHECK(mtml::parse_association_dump(text) == rows);
  CHECK(mtml::association_dump_filename(3) == "association_round_03.csv");
  CHECK(mtml::association_dump_filename(12) == "association_round_12.csv");
  CHECK(error_of([] { mtml::parse_association_dump("# mtml-association v1\nround\n1,2\n"); }) ==
        ErrorCode::kParseError);
}

TEST_CASE("report renderings") {
  mtml::EvalReport r;
  r.cmc = {{1, 0.5}, {5, 0.75}, {10, 1.0}, {20, 1.0}};
  r.map_score = 0.625;
  r.num_probes_evaluated = 4;
  const auto csv = mtml::eval_report_csv(r);
  CHECK(csv.rfind("# mtml-eval v1\n", 0) == 0);
  CHECK(csv.find("R1,0.5\n") != std::string::npos);
  CHECK(csv.find("mAP,0.625\n") != std::string::npos);
  CHECK(mtml::eval_report_table(r).find("62.5") != std::string::npos);

  const std::vector<mtml::DynamicsRow> dyn{{1, 3, 2.0 / 3.0}, {2, 0, std::nullopt}};
  const auto dcsv = mtml::dynamics_csv(dyn);
  CHECK(dcsv.rfind("# mtml-dynamics v1\n", 0) == 0);
  CHECK(dcsv.find("2,0,-\n") != std::string::npos);
  CHECK(mtml::dynamics_table(dyn).find('-') != std::string::npos);

  const auto dist = mtml::distance_matrix_csv({1, 2, {0.5, 1.5}});
  CHECK(dist.rfind("# mtml-distances v1\n", 0) == 0);
}

TEST_CASE("training pipeline writes metrics, checkpoints and dumps") {
  oracle::TempDir dir("pipe");
  mtml::SynthConfig sc;
  sc.camera_presence_probability = 1.0;
  const auto ds = mtml::generate_synthetic(sc);
  mtml::ModelConfig mc;
  mc.hidden_dims = {16};
  mc.feature_dim = 8;
  const auto cfg = tiny_schedule();
  std::vector<std::string> log;
  const auto result = mtml::run_training(ds, mc, cfg, dir.path().string(),
                                         [&](std::string_view line) { log.emplace_back(line); });
  for (const char* name : {"metrics.csv", "checkpoint_pretrain.txt", "checkpoint_iter_01.txt", "checkpoint_iter_02.txt",
                           "checkpoint_final.txt", "association_round_01.csv", "association_round_02.csv"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir.path() / name), name);
  }
  CHECK_FALSE(std::filesystem::exists(dir.path() / "association_round_00.csv"));
  CHECK(result.last_checkpoint == (dir.path() / "checkpoint_final.txt").string());
  CHECK(mtml::load_checkpoint(result.last_checkpoint) == result.state.params);
  const auto rows = mtml::parse_metrics_csv(slurp(dir.path() / "metrics.csv"));
  CHECK(rows.size() == 6 + 2 * 3);
  CHECK(!log.empty());

  const auto dyn = mtml::run_dynamics(dir.path().string(), dir.path().string());
  REQUIRE(dyn.size() == 2);
  for (std::size_t i = 0; i < dyn.size(); ++i) {
    CHECK(dyn[i].round == static_cast<int>(i) + 1);
    CHECK(dyn[i].pairs == result.state.rounds[i + 1].pairs);
    const auto raw = mtml::parse_association_dump(slurp(dir.path() / mtml::association_dump_filename(dyn[i].round)));
    CHECK(raw.size() == dyn[i].pairs);
  }
  CHECK(std::filesystem::exists(dir.path() / "dynamics.csv"));
  CHECK(std::filesystem::exists(dir.path() / "dynamics.txt"));

  const auto test = mtml::generate_synthetic_split(sc, 10).test;
  const auto report = mtml::run_evaluation(result.state.params, test, 0.25, 7, dir.path().string(), true);
  CHECK(std::filesystem::exists(dir.path() / "eval.csv"));
  CHECK(std::filesystem::exists(dir.path() / "eval.txt"));
  CHECK(std::filesystem::exists(dir.path() / "distances.csv"));
  CHECK(report.num_probes_evaluated > 0);
}

TEST_CASE("mt-only pipeline keeps ML loss at zero and writes no dumps") {
  oracle::TempDir dir("mtonly");
  const auto ds = mtml::generate_synthetic({});
  mtml::ModelConfig mc;
  mc.hidden_dims = {16};
  mc.feature_dim = 8;
  auto cfg = tiny_schedule();
  cfg.mt_only = true;
  mtml::run_training(ds, mc, cfg, dir.path().string());
  for (const auto& r : mtml::parse_metrics_csv(slurp(dir.path() / "metrics.csv"))) CHECK(r.ml_loss == 0.0);
  CHECK(error_of([&] { mtml::run_dynamics(dir.path().string(), dir.path().string()); }) == ErrorCode::kMissingDumps);
}

TEST_CASE("pipeline error paths") {
  const auto ds = mtml::generate_synthetic({});
  CHECK(error_of([&] { mtml::run_training(ds, {}, tiny_schedule(), "/nonexistent/run"); }) == ErrorCode::kIoError);

  // a run that diverges after pretraining reports the last good checkpoint
  oracle::TempDir dir("diverge");
  mtml::ModelConfig mc;
  mc.hidden_dims = {16};
  mc.feature_dim = 8;
  auto cfg = tiny_schedule();
  cfg.ml_base_lr = 1e300;
  try {
    mtml::run_training(ds, mc, cfg, dir.path().string());
    FAIL("expected divergence");
  } catch (const mtml::Error& e) {
    CHECK(e.code() == ErrorCode::kNumericFailure);
    CHECK(std::string(e.what()).find("last good checkpoint") != std::string::npos);
    CHECK(std::string(e.what()).find("checkpoint_pretrain.txt") != std::string::npos);
  }
}
