// Exercises the shared library through its C header only.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "mtml/mtml.h"

namespace {

std::filesystem::path scratch(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("mtml_capi_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

mtml_train_config short_schedule() {
  mtml_train_config t;
  mtml_train_config_default(&t);
  t.pretrain_epochs = 5;
  t.ml_iterations = 2;
  t.epochs_per_iteration = 2;
  return t;
}

}  // namespace

TEST_CASE("defaults and status strings") {
  mtml_synth_config s;
  mtml_synth_config_default(&s);
  CHECK(s.num_global_identities == 20);
  CHECK(s.num_cameras == 3);
  mtml_model_config m;
  mtml_model_config_default(&m);
  CHECK(m.num_hidden == 1);
  CHECK(m.hidden_dims[0] == 64);
  CHECK(m.feature_dim == 64);
  mtml_train_config t;
  mtml_train_config_default(&t);
  CHECK(t.lambda_ml == 0.5);
  CHECK(t.initial_lr == 0.05);
  CHECK(t.ml_iterations == 8);
  CHECK(t.initial_association == 1);
  CHECK(std::strcmp(mtml_status_string(MTML_ERR_PARSE), "parse error") == 0);
  CHECK(std::strlen(mtml_version()) > 0);
}

TEST_CASE("dataset lifecycle") {
  const auto dir = scratch("ds");
  mtml_synth_config s;
  mtml_synth_config_default(&s);
  s.camera_presence_probability = 1.0;
  s.num_global_identities = 10;
  s.images_per_identity_per_camera = 4;
  mtml_dataset* ds = nullptr;
  REQUIRE(mtml_dataset_generate(&s, &ds) == MTML_OK);
  CHECK(mtml_dataset_num_cameras(ds) == 3);
  CHECK(mtml_dataset_feature_dim(ds) == 16);
  CHECK(mtml_dataset_num_samples(ds) == 120);
  CHECK(mtml_dataset_has_ground_truth(ds) == 1);
  int n = 0;
  size_t count = 0;
  CHECK(mtml_dataset_camera_info(ds, 2, &n, &count) == MTML_OK);
  CHECK(n == 10);
  CHECK(count == 40);
  CHECK(mtml_dataset_camera_info(ds, 4, &n, &count) != MTML_OK);

  const auto path = (dir / "d.csv").string();
  CHECK(mtml_dataset_save(ds, path.c_str()) == MTML_OK);
  mtml_dataset* back = nullptr;
  CHECK(mtml_dataset_load(path.c_str(), &back) == MTML_OK);
  CHECK(mtml_dataset_num_samples(back) == 120);
  mtml_dataset_free(back);
  mtml_dataset_free(ds);

  mtml_dataset* missing = nullptr;
  CHECK(mtml_dataset_load((dir / "nope.csv").c_str(), &missing) == MTML_ERR_IO);
  CHECK(missing == nullptr);
  CHECK(std::strstr(mtml_last_error(), "nope.csv") != nullptr);
  s.camera_presence_probability = 0.0;
  CHECK(mtml_dataset_generate(&s, &ds) == MTML_ERR_INVALID_ARGUMENT);
  CHECK(mtml_dataset_generate(nullptr, &ds) == MTML_ERR_INVALID_ARGUMENT);
  mtml_dataset_free(nullptr);
  std::filesystem::remove_all(dir);
}

TEST_CASE("train, evaluate and inspect through the C API") {
  const auto dir = scratch("train");
  mtml_synth_config s;
  mtml_synth_config_default(&s);
  mtml_dataset* train = nullptr;
  mtml_dataset* test = nullptr;
  REQUIRE(mtml_dataset_generate_split(&s, 10, &train, &test) == MTML_OK);
  mtml_model_config m;
  mtml_model_config_default(&m);
  m.hidden_dims[0] = 16;
  m.feature_dim = 8;
  const auto t = short_schedule();
  int lines = 0;
  auto counter = [](const char*, void* user) { ++*static_cast<int*>(user); };
  mtml_model* model = nullptr;
  mtml_train_summary summary{};
  REQUIRE(mtml_train(train, &m, &t, dir.c_str(), counter, &lines, &model, &summary) == MTML_OK);
  CHECK(lines > 0);
  CHECK(summary.epochs_run == 5 + 2 * 2);
  CHECK(summary.association_rounds == 2);
  CHECK(mtml_model_input_dim(model) == 16);
  CHECK(mtml_model_feature_dim(model) == 8);
  CHECK(mtml_model_num_heads(model) == 3);

  std::vector<double> x(2 * 16, 0.5), v(2 * 8, 0.0);
  CHECK(mtml_model_extract_features(model, x.data(), 2, v.data()) == MTML_OK);
  for (std::size_t i = 0; i < 8; ++i) CHECK(v[i] == v[8 + i]);

  mtml_model* loaded = nullptr;
  REQUIRE(mtml_model_load((dir / "checkpoint_final.txt").c_str(), &loaded) == MTML_OK);
  std::vector<double> w(2 * 8, 1.0);
  CHECK(mtml_model_extract_features(loaded, x.data(), 2, w.data()) == MTML_OK);
  CHECK(v == w);

  mtml_eval_report report{};
  CHECK(mtml_evaluate(loaded, test, 0.25, 7, dir.c_str(), 0, &report) == MTML_OK);
  CHECK(report.num_probes_evaluated > 0);
  CHECK(report.r1 <= report.r5);
  CHECK(report.map_score >= 0.0);
  CHECK(report.map_score <= 1.0);
  CHECK(std::filesystem::exists(dir / "eval.csv"));

  size_t count = 0;
  CHECK(mtml_dynamics(dir.c_str(), dir.c_str(), nullptr, 0, &count) == MTML_OK);
  CHECK(count == 2);
  std::vector<mtml_dynamics_row> rows(count);
  CHECK(mtml_dynamics(dir.c_str(), dir.c_str(), rows.data(), rows.size(), &count) == MTML_OK);
  CHECK(rows[1].round == 2);
  CHECK(rows[1].pairs == summary.final_pairs);

  // wrong feature length between model and dataset
  mtml_synth_config narrow = s;
  narrow.feature_dim = 4;
  mtml_dataset* other = nullptr;
  REQUIRE(mtml_dataset_generate(&narrow, &other) == MTML_OK);
  CHECK(mtml_evaluate(loaded, other, 0.25, 7, dir.c_str(), 0, &report) == MTML_ERR_INCOMPATIBLE_ARTIFACTS);

  mtml_dataset_free(other);
  mtml_model_free(loaded);
  mtml_model_free(model);
  mtml_dataset_free(train);
  mtml_dataset_free(test);
  std::filesystem::remove_all(dir);
}

TEST_CASE("C API argument checks") {
  mtml_model* model = nullptr;
  CHECK(mtml_model_load("/nonexistent/ckpt.txt", &model) != MTML_OK);
  CHECK(model == nullptr);
  CHECK(mtml_dynamics(nullptr, "/tmp", nullptr, 0, nullptr) == MTML_ERR_INVALID_ARGUMENT);
  size_t count = 0;
  const auto empty = scratch("empty");
  CHECK(mtml_dynamics(empty.c_str(), empty.c_str(), nullptr, 0, &count) == MTML_ERR_MISSING_DUMPS);
  mtml_model_config m;
  mtml_model_config_default(&m);
  m.num_hidden = MTML_MAX_HIDDEN_LAYERS + 1;
  mtml_synth_config s;
  mtml_synth_config_default(&s);
  mtml_dataset* ds = nullptr;
  REQUIRE(mtml_dataset_generate(&s, &ds) == MTML_OK);
  const auto t = short_schedule();
  CHECK(mtml_train(ds, &m, &t, empty.c_str(), nullptr, nullptr, nullptr, nullptr) == MTML_ERR_INVALID_ARGUMENT);
  mtml_dataset_free(ds);
  std::filesystem::remove_all(empty);
}
