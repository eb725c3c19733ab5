// Exercises the shared library strictly through dml.h.
#include <doctest.h>

#include <dml/dml.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dml_capi_" + name)).string();
}

dml_config* small_config() {
  dml_config* cfg = nullptr;
  REQUIRE(dml_config_new(&cfg) == DML_OK);
  const char* pairs[][2] = {{"gbrt.n_estimators", "15"}, {"gbrt.max_depth", "3"}, {"mlp.hidden_sizes", "8,4"},
                            {"mlp.epochs", "5"},         {"gate.hidden_sizes", "8"}, {"gate.epochs", "5"},
                            {"mc_samples", "5"},          {"ig_steps", "5"}};
  for (auto& kv : pairs) REQUIRE(dml_config_set(cfg, kv[0], kv[1]) == DML_OK);
  return cfg;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(dml_status_name(DML_OK)) == "ok");
  CHECK(std::string(dml_status_name(DML_ERR_SCHEMA)) == "schema error");
  CHECK(dml_model_format_version() == 1);
}

TEST_CASE("null handles are rejected") {
  CHECK(dml_dataset_read_csv(nullptr, "target", 0, nullptr) == DML_ERR_INVALID_INPUT);
  CHECK(std::strstr(dml_last_error(), "NULL") != nullptr);
  CHECK(dml_dataset_rows(nullptr) == 0);
  CHECK(dml_dataset_row(nullptr, 0) == nullptr);
  dml_dataset_free(nullptr);
  dml_model_free(nullptr);
  dml_config_free(nullptr);
}

TEST_CASE("configuration through the C API") {
  dml_config* cfg = nullptr;
  REQUIRE(dml_config_new(&cfg) == DML_OK);
  CHECK(dml_config_seed(cfg) == 42);
  CHECK(dml_config_train_fraction(cfg) == 0.8);
  CHECK(dml_config_set(cfg, "seed", "9") == DML_OK);
  CHECK(dml_config_seed(cfg) == 9);
  CHECK(dml_config_set(cfg, "bogus", "1") == DML_ERR_INVALID_INPUT);
  CHECK(std::strstr(dml_last_error(), "bogus") != nullptr);
  CHECK(dml_config_load_file(cfg, temp_path("missing.cfg").c_str()) == DML_ERR_IO);

  bool found = false;
  for (size_t i = 0; i < dml_config_entry_count(cfg); ++i) {
    const char* k = nullptr;
    const char* v = nullptr;
    REQUIRE(dml_config_entry(cfg, i, &k, &v) == DML_OK);
    if (std::string(k) == "seed") found = std::string(v) == "9";
  }
  CHECK(found);
  CHECK(dml_config_entry(cfg, 10000, nullptr, nullptr) == DML_ERR_INVALID_INPUT);
  dml_config_free(cfg);
}

TEST_CASE("synthesize, split, train, evaluate, persist") {
  dml_dataset* data = nullptr;
  REQUIRE(dml_dataset_synth("two-regime", 300, 0.1, 2, &data) == DML_OK);
  CHECK(dml_dataset_rows(data) == 300);
  CHECK(dml_dataset_cols(data) == 7);
  CHECK(std::string(dml_dataset_feature_name(data, 0)) == "regime");
  dml_dataset* none = nullptr;
  CHECK(dml_dataset_synth("cubic", 10, 0, 1, &none) == DML_ERR_INVALID_INPUT);
  CHECK(none == nullptr);

  dml_dataset *train = nullptr, *test = nullptr;
  REQUIRE(dml_dataset_split(data, 0.8, 42, &train, &test) == DML_OK);
  CHECK(dml_dataset_rows(train) == 240);
  CHECK(dml_dataset_rows(test) == 60);

  dml_config* cfg = small_config();
  int calls = 0;
  auto progress = [](const char*, const char*, void* user) { ++*static_cast<int*>(user); };
  dml_model* model = nullptr;
  REQUIRE(dml_train(train, cfg, progress, &calls, &model) == DML_OK);
  CHECK(calls > 0);
  CHECK(dml_model_input_dim(model) == 7);
  CHECK(std::string(dml_model_feature_name(model, 1)) == "x1");

  dml_metrics rows[4];
  REQUIRE(dml_evaluate(model, test, rows) == DML_OK);
  for (auto& r : rows) CHECK(std::isfinite(r.rmse));

  const std::string path = temp_path("model.txt");
  REQUIRE(dml_model_save(model, path.c_str()) == DML_OK);
  dml_model* loaded = nullptr;
  REQUIRE(dml_model_load(path.c_str(), &loaded) == DML_OK);
  dml_metrics again[4];
  REQUIRE(dml_evaluate(loaded, test, again) == DML_OK);
  for (int i = 0; i < 4; ++i) {
    CHECK(rows[i].rmse == again[i].rmse);
    CHECK(rows[i].mae == again[i].mae);
    CHECK(rows[i].r2 == again[i].r2);
  }

  dml_prediction p{};
  double importance[7];
  REQUIRE(dml_predict(loaded, dml_dataset_row(test, 0), 7, &p, importance) == DML_OK);
  CHECK(std::abs(p.prediction - (p.w_xgb * p.y_xgb + p.w_nn * p.y_nn)) <= 1e-9);
  CHECK(std::abs(p.p_xgb + p.p_nn + p.p_hybrid - 1.0) <= 1e-9);
  double s = 0;
  for (double v : importance) s += v;
  CHECK(s == doctest::Approx(1.0));
  CHECK(dml_predict(loaded, dml_dataset_row(test, 0), 6, &p, nullptr) == DML_ERR_INVALID_INPUT);

  dml_selection_stats stats{};
  REQUIRE(dml_inspect(loaded, test, &stats, importance) == DML_OK);
  CHECK(stats.count == 60);
  CHECK(std::abs(stats.mean[0] + stats.mean[1] + stats.mean[2] - 1.0) <= 1e-9);
  CHECK(stats.argmax_count[0] + stats.argmax_count[1] + stats.argmax_count[2] == 60);

  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("dml-model 99\n", f);
  std::fclose(f);
  dml_model* bad = nullptr;
  CHECK(dml_model_load(path.c_str(), &bad) == DML_ERR_UNSUPPORTED_FORMAT);
  CHECK(bad == nullptr);
  f = std::fopen(path.c_str(), "w");
  std::fputs("dml-model 1\nseed 3\nmc_", f);
  std::fclose(f);
  CHECK(dml_model_load(path.c_str(), &bad) == DML_ERR_PARSE);
  std::remove(path.c_str());

  dml_model_free(loaded);
  dml_model_free(model);
  dml_config_free(cfg);
  dml_dataset_free(train);
  dml_dataset_free(test);
  dml_dataset_free(data);
}

TEST_CASE("csv errors map to schema status") {
  const std::string path = temp_path("bad.csv");
  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("a,b\n1,2\n", f);
  std::fclose(f);
  dml_dataset* d = nullptr;
  CHECK(dml_dataset_read_csv(path.c_str(), "target", 0, &d) == DML_ERR_SCHEMA);
  CHECK(std::strstr(dml_last_error(), "target") != nullptr);
  REQUIRE(dml_dataset_read_csv(path.c_str(), "target", DML_CSV_TARGET_OPTIONAL, &d) == DML_OK);
  CHECK(dml_dataset_has_target(d) == 0);
  dml_config* cfg = small_config();
  dml_model* m = nullptr;
  CHECK(dml_train(d, cfg, nullptr, nullptr, &m) == DML_ERR_INVALID_INPUT);
  dml_config_free(cfg);
  dml_dataset_free(d);
  std::remove(path.c_str());
}
