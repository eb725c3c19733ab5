#include "dml/dml.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include "dml/error.hpp"
#include "dml/io.hpp"
#include "dml/pipeline.hpp"

struct dml_dataset {
  dml::numkit::Dataset data;
  bool has_target = true;
};

struct dml_config {
  dml::io::RunConfig config;
  std::vector<std::pair<std::string, std::string>> snapshot;
};

struct dml_model {
  dml::pipeline::DmlModel model;
};

namespace {

thread_local std::string g_last_error;

dml_status to_status(dml::ErrorCode code) {
  switch (code) {
    case dml::ErrorCode::invalid_input: return DML_ERR_INVALID_INPUT;
    case dml::ErrorCode::undefined_metric: return DML_ERR_UNDEFINED_METRIC;
    case dml::ErrorCode::diverged_training: return DML_ERR_DIVERGED;
    case dml::ErrorCode::unsupported_format: return DML_ERR_UNSUPPORTED_FORMAT;
    case dml::ErrorCode::parse_error: return DML_ERR_PARSE;
    case dml::ErrorCode::schema_error: return DML_ERR_SCHEMA;
    case dml::ErrorCode::io_error: return DML_ERR_IO;
  }
  return DML_ERR_INTERNAL;
}

dml_status fail(dml_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
dml_status guarded(Fn&& fn) {
  try {
    fn();
    return DML_OK;
  } catch (const dml::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DML_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DML_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DML_ERR_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw dml::InvalidInput(std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* dml_last_error(void) { return g_last_error.c_str(); }

const char* dml_status_name(dml_status status) {
  switch (status) {
    case DML_OK: return "ok";
    case DML_ERR_INVALID_INPUT: return "invalid input";
    case DML_ERR_UNDEFINED_METRIC: return "undefined metric";
    case DML_ERR_DIVERGED: return "diverged training";
    case DML_ERR_UNSUPPORTED_FORMAT: return "unsupported format";
    case DML_ERR_PARSE: return "parse error";
    case DML_ERR_SCHEMA: return "schema error";
    case DML_ERR_IO: return "i/o error";
    case DML_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int dml_model_format_version(void) { return dml::pipeline::kFormatVersion; }

// ---- datasets --------------------------------------------------------------

dml_status dml_dataset_read_csv(const char* path, const char* target_column, unsigned flags,
                                dml_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    dml::io::CsvOptions options;
    if (target_column != nullptr) options.target_column = target_column;
    options.target_optional = (flags & DML_CSV_TARGET_OPTIONAL) != 0;
    options.allow_empty = (flags & DML_CSV_ALLOW_EMPTY) != 0;
    auto table = dml::io::read_csv(path, options);
    *out = new dml_dataset{std::move(table.data), table.has_target};
  });
}

dml_status dml_dataset_write_csv(const dml_dataset* data, const char* path,
                                 const char* target_column) {
  return guarded([&] {
    require(data, "data");
    require(path, "path");
    dml::io::write_csv(data->data, path, target_column ? target_column : "target");
  });
}

dml_status dml_dataset_synth(const char* kind, size_t rows, double noise_std, uint64_t seed,
                             dml_dataset** out) {
  return guarded([&] {
    require(kind, "kind");
    require(out, "out");
    *out = nullptr;
    auto data = dml::io::synthesize(dml::io::parse_synth_kind(kind), rows, noise_std, seed);
    *out = new dml_dataset{std::move(data), true};
  });
}

dml_status dml_dataset_split(const dml_dataset* data, double train_fraction, uint64_t seed,
                             dml_dataset** train, dml_dataset** test) {
  return guarded([&] {
    require(data, "data");
    require(train, "train");
    require(test, "test");
    *train = nullptr;
    *test = nullptr;
    auto [a, b] = dml::numkit::train_test_split(data->data, {train_fraction, seed});
    auto first = std::make_unique<dml_dataset>(dml_dataset{std::move(a), data->has_target});
    auto second = std::make_unique<dml_dataset>(dml_dataset{std::move(b), data->has_target});
    *train = first.release();
    *test = second.release();
  });
}

size_t dml_dataset_rows(const dml_dataset* data) { return data ? data->data.size() : 0; }
size_t dml_dataset_cols(const dml_dataset* data) { return data ? data->data.dim() : 0; }
int dml_dataset_has_target(const dml_dataset* data) { return data && data->has_target ? 1 : 0; }

const char* dml_dataset_feature_name(const dml_dataset* data, size_t column) {
  if (!data || column >= data->data.feature_names.size()) return nullptr;
  return data->data.feature_names[column].c_str();
}

const double* dml_dataset_row(const dml_dataset* data, size_t row) {
  if (!data || row >= data->data.size()) return nullptr;
  return data->data.features.row(row).data();
}

double dml_dataset_target(const dml_dataset* data, size_t row) {
  if (!data || row >= data->data.size()) return 0.0;
  return data->data.targets[row];
}

void dml_dataset_free(dml_dataset* data) { delete data; }

// ---- configuration -----------------------------------------------------------

dml_status dml_config_new(dml_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new dml_config{};
    (*out)->snapshot = (*out)->config.entries();
  });
}

void dml_config_free(dml_config* config) { delete config; }

dml_status dml_config_set(dml_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
    config->snapshot = config->config.entries();
  });
}

dml_status dml_config_load_file(dml_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->config.load_file(path);
    config->snapshot = config->config.entries();
  });
}

size_t dml_config_entry_count(const dml_config* config) {
  return config ? config->snapshot.size() : 0;
}

dml_status dml_config_entry(const dml_config* config, size_t index, const char** key,
                            const char** value) {
  return guarded([&] {
    require(config, "config");
    if (index >= config->snapshot.size()) throw dml::InvalidInput("config entry index out of range");
    if (key) *key = config->snapshot[index].first.c_str();
    if (value) *value = config->snapshot[index].second.c_str();
  });
}

double dml_config_train_fraction(const dml_config* config) {
  return config ? config->config.train_fraction() : 0.0;
}

uint64_t dml_config_seed(const dml_config* config) {
  return config ? config->config.dml().seed : 0;
}

// ---- training and persistence ------------------------------------------------

dml_status dml_train(const dml_dataset* train, const dml_config* config, dml_progress_fn progress,
                     void* user, dml_model** out) {
  return guarded([&] {
    require(train, "train");
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    if (!train->has_target) throw dml::InvalidInput("training data has no target column");
    dml::pipeline::ProgressFn sink;
    if (progress != nullptr)
      sink = [&](const std::string& phase, const std::string& message) {
        progress(phase.c_str(), message.c_str(), user);
      };
    auto model = dml::pipeline::train_dml(train->data, config->config.dml(), sink);
    *out = new dml_model{std::move(model)};
  });
}

dml_status dml_model_save(const dml_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    dml::pipeline::save_model(model->model, path);
  });
}

dml_status dml_model_load(const char* path, dml_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto model = dml::pipeline::load_model(path);
    *out = new dml_model{std::move(model)};
  });
}

void dml_model_free(dml_model* model) { delete model; }

size_t dml_model_input_dim(const dml_model* model) { return model ? model->model.input_dim() : 0; }

const char* dml_model_feature_name(const dml_model* model, size_t column) {
  if (!model || column >= model->model.feature_names.size()) return nullptr;
  return model->model.feature_names[column].c_str();
}

// ---- inference -----------------------------------------------------------------

dml_status dml_predict(const dml_model* model, const double* x, size_t dim, dml_prediction* out,
                       double* importance) {
  return guarded([&] {
    require(model, "model");
    require(x, "x");
    require(out, "out");
    const auto r = dml::pipeline::predict_dml(model->model, std::span<const double>(x, dim));
    *out = dml_prediction{r.prediction, r.y_xgb,    r.y_nn,  r.p.p_xgb, r.p.p_nn,
                          r.p.p_hybrid, r.w_xgb,    r.w_nn,  r.c_xgb,   r.c_nn};
    if (importance != nullptr)
      for (std::size_t i = 0; i < r.importance.size(); ++i) importance[i] = r.importance[i];
  });
}

dml_status dml_evaluate(const dml_model* model, const dml_dataset* test, dml_metrics out[4]) {
  return guarded([&] {
    require(model, "model");
    require(test, "test");
    require(out, "out");
    if (!test->has_target) throw dml::InvalidInput("evaluation data has no target column");
    const auto eval = dml::pipeline::evaluate(model->model, test->data);
    for (std::size_t i = 0; i < 4; ++i) out[i] = {eval.rows[i].rmse, eval.rows[i].mae, eval.rows[i].r2};
  });
}

dml_status dml_inspect(const dml_model* model, const dml_dataset* data, dml_selection_stats* out,
                       double* importance) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    require(out, "out");
    if (data->data.dim() != model->model.input_dim())
      throw dml::InvalidInput("expected " + std::to_string(model->model.input_dim()) +
                              " features, got " + std::to_string(data->data.dim()));
    const auto reports = dml::pipeline::predict_all(model->model, data->data.features);
    const auto stats = dml::pipeline::selection_stats(reports);
    out->count = stats.count;
    for (std::size_t c = 0; c < 3; ++c) {
      out->mean[c] = stats.mean[c];
      out->stddev[c] = stats.stddev[c];
      out->argmax_count[c] = stats.argmax_count[c];
      out->argmax_share[c] = stats.argmax_share[c];
    }
    if (importance != nullptr) {
      const auto imp = dml::pipeline::mean_importance(reports);
      for (std::size_t i = 0; i < imp.size(); ++i) importance[i] = imp[i];
    }
  });
}

}  // extern "C"
