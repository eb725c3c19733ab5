// Command-line front end. Talks to the library only through dml.h.
#include <dml/dml.h>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kTraining = 3, kPersistence = 4 };

struct Failure {
  int exit_code;
  std::string message;
};

struct DatasetDeleter {
  void operator()(dml_dataset* d) const { dml_dataset_free(d); }
};
struct ConfigDeleter {
  void operator()(dml_config* c) const { dml_config_free(c); }
};
struct ModelDeleter {
  void operator()(dml_model* m) const { dml_model_free(m); }
};
using DatasetPtr = std::unique_ptr<dml_dataset, DatasetDeleter>;
using ConfigPtr = std::unique_ptr<dml_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<dml_model, ModelDeleter>;

void check(dml_status status, int exit_code, const std::string& context) {
  if (status == DML_OK) return;
  std::string msg = context + ": " + dml_status_name(status);
  const std::string detail = dml_last_error();
  if (!detail.empty()) msg += ": " + detail;
  throw Failure{exit_code, msg};
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Options shared by the commands that build a configuration.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> seed, meta_fraction, alpha, lambda, mc_samples, ig_steps;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--meta-fraction", meta_fraction, "share of training rows held out for the gate");
    cmd->add_option("--alpha", alpha, "weight of the KL exploration term");
    cmd->add_option("--lambda", lambda, "tree-importance share in the fused importance");
    cmd->add_option("--mc-samples", mc_samples, "Monte Carlo dropout passes");
    cmd->add_option("--ig-steps", ig_steps, "Integrated Gradients steps");
    cmd->add_option("--set", sets, "override any config key (key=value), repeatable");
  }

  ConfigPtr build() const {
    dml_config* raw = nullptr;
    check(dml_config_new(&raw), kUsage, "config");
    ConfigPtr cfg(raw);
    if (!config_path.empty()) check(dml_config_load_file(cfg.get(), config_path.c_str()), kUsage, "config");
    const std::pair<const char*, const std::optional<std::string>*> flags[] = {
        {"seed", &seed},         {"meta_fraction", &meta_fraction}, {"alpha", &alpha},
        {"lambda", &lambda},     {"mc_samples", &mc_samples},       {"ig_steps", &ig_steps}};
    for (const auto& [key, value] : flags)
      if (value->has_value()) check(dml_config_set(cfg.get(), key, (*value)->c_str()), kUsage, "config");
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{kUsage, "--set expects key=value, got '" + kv + "'"};
      check(dml_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), kUsage,
            "config");
    }
    return cfg;
  }
};

std::map<std::string, std::string> config_entries(const dml_config* cfg) {
  std::map<std::string, std::string> out;
  for (size_t i = 0; i < dml_config_entry_count(cfg); ++i) {
    const char* k = nullptr;
    const char* v = nullptr;
    check(dml_config_entry(cfg, i, &k, &v), kUsage, "config");
    out[k] = v;
  }
  return out;
}

void echo_config(const dml_config* cfg, std::ostream& out, const char* prefix) {
  for (size_t i = 0; i < dml_config_entry_count(cfg); ++i) {
    const char* k = nullptr;
    const char* v = nullptr;
    check(dml_config_entry(cfg, i, &k, &v), kUsage, "config");
    out << prefix << k << "=" << v << "\n";
  }
}

DatasetPtr read_dataset(const std::string& path, const std::string& target, unsigned flags) {
  dml_dataset* raw = nullptr;
  check(dml_dataset_read_csv(path.c_str(), target.c_str(), flags, &raw), kData, "reading '" + path + "'");
  return DatasetPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  dml_model* raw = nullptr;
  check(dml_model_load(path.c_str(), &raw), kPersistence, "loading model '" + path + "'");
  return ModelPtr(raw);
}

struct PhaseLog {
  std::vector<std::string> phases;
};

void on_progress(const char* phase, const char* message, void* user) {
  auto* log = static_cast<PhaseLog*>(user);
  if (log->phases.empty() || log->phases.back() != phase) log->phases.emplace_back(phase);
  std::cerr << "[" << phase << "] " << message << "\n";
}

ModelPtr train(const dml_dataset* data, const dml_config* cfg, PhaseLog& log) {
  dml_model* raw = nullptr;
  check(dml_train(data, cfg, on_progress, &log, &raw), kTraining, "training");
  return ModelPtr(raw);
}

void require_arity(const dml_model* model, const dml_dataset* data) {
  const size_t want = dml_model_input_dim(model);
  const size_t got = dml_dataset_cols(data);
  if (want != got)
    throw Failure{kData, "feature arity mismatch: model expects " + std::to_string(want) +
                             " features, data has " + std::to_string(got)};
}

// ---- commands -----------------------------------------------------------------

struct TrainArgs {
  std::string data, model, target = "target";
  ConfigFlags flags;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = a.flags.build();
  auto data = read_dataset(a.data, a.target, 0);
  const auto entries = config_entries(cfg.get());
  const size_t n = dml_dataset_rows(data.get());
  const size_t meta_rows = static_cast<size_t>(static_cast<double>(n) * std::strtod(entries.at("meta_fraction").c_str(), nullptr));

  std::cerr << "training on " << n << " rows x " << dml_dataset_cols(data.get()) << " features ("
            << n - meta_rows << " base, " << meta_rows << " meta)\n";
  echo_config(cfg.get(), std::cerr, "  ");

  PhaseLog log;
  auto model = train(data.get(), cfg.get(), log);
  check(dml_model_save(model.get(), a.model.c_str()), kPersistence, "saving model '" + a.model + "'");
  std::cerr << "model written to " << a.model << "\n";

  std::cout << "rows=" << n << "\n"
            << "features=" << dml_dataset_cols(data.get()) << "\n"
            << "base_rows=" << n - meta_rows << "\n"
            << "meta_rows=" << meta_rows << "\n";
  echo_config(cfg.get(), std::cout, "config.");
  for (const auto& p : log.phases) std::cout << "phase." << p << "=ok\n";
  std::cout << "model=" << a.model << "\n";
  return kOk;
}

struct CompareArgs {
  std::string data, target = "target";
  ConfigFlags flags;
};

int cmd_compare(const CompareArgs& a) {
  auto cfg = a.flags.build();
  auto data = read_dataset(a.data, a.target, 0);
  dml_dataset* tr = nullptr;
  dml_dataset* te = nullptr;
  check(dml_dataset_split(data.get(), dml_config_train_fraction(cfg.get()), dml_config_seed(cfg.get()), &tr, &te),
        kData, "splitting data");
  DatasetPtr train_set(tr), test_set(te);
  std::cerr << "split " << dml_dataset_rows(data.get()) << " rows into " << dml_dataset_rows(tr) << " train / "
            << dml_dataset_rows(te) << " test\n";
  echo_config(cfg.get(), std::cerr, "  ");

  PhaseLog log;
  auto model = train(tr, cfg.get(), log);
  dml_metrics rows[4];
  check(dml_evaluate(model.get(), te, rows), kData, "evaluating");

  static const char* const names[4] = {"gbrt", "nn", "simple_average", "dml"};
  std::cout << "model,rmse,mae,r2\n";
  for (int i = 0; i < 4; ++i)
    std::cout << names[i] << "," << fixed6(rows[i].rmse) << "," << fixed6(rows[i].mae) << ","
              << fixed6(rows[i].r2) << "\n";
  return kOk;
}

struct ModelDataArgs {
  std::string data, model, out, target = "target";
};

int cmd_predict(const ModelDataArgs& a) {
  auto model = load_model(a.model);
  auto data = read_dataset(a.data, a.target, DML_CSV_TARGET_OPTIONAL | DML_CSV_ALLOW_EMPTY);
  require_arity(model.get(), data.get());

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary);
    if (!file) throw Failure{kData, "cannot open '" + a.out + "' for writing"};
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "prediction,y_xgb,y_nn,p_xgb,p_nn,p_hybrid,w_xgb,w_nn,c_xgb,c_nn\n";
  const size_t d = dml_dataset_cols(data.get());
  for (size_t r = 0; r < dml_dataset_rows(data.get()); ++r) {
    dml_prediction p{};
    check(dml_predict(model.get(), dml_dataset_row(data.get(), r), d, &p, nullptr), kData,
          "predicting row " + std::to_string(r + 1));
    const double values[] = {p.prediction, p.y_xgb, p.y_nn,  p.p_xgb, p.p_nn,
                             p.p_hybrid,   p.w_xgb, p.w_nn, p.c_xgb, p.c_nn};
    for (size_t i = 0; i < std::size(values); ++i) out << (i ? "," : "") << fixed6(values[i]);
    out << "\n";
  }
  out.flush();
  if (!out) throw Failure{kData, "write failed"};
  return kOk;
}

// Selection shares reported for the California Housing run, shown next to
// ours for comparison only.
constexpr double kReferenceMeans[3] = {0.485, 0.335, 0.180};

int cmd_inspect(const ModelDataArgs& a) {
  auto model = load_model(a.model);
  auto data = read_dataset(a.data, a.target, DML_CSV_TARGET_OPTIONAL);
  require_arity(model.get(), data.get());

  const size_t d = dml_model_input_dim(model.get());
  dml_selection_stats stats{};
  std::vector<double> importance(d);
  check(dml_inspect(model.get(), data.get(), &stats, importance.data()), kData, "inspecting");

  std::cerr << "selection statistics over " << stats.count << " samples\n";
  static const char* const classes[3] = {"xgb", "nn", "hybrid"};
  std::cout << "section,name,mean,std,argmax_share,reference_mean\n";
  for (int c = 0; c < 3; ++c)
    std::cout << "selection," << classes[c] << "," << fixed6(stats.mean[c]) << "," << fixed6(stats.stddev[c])
              << "," << fixed6(stats.argmax_share[c]) << "," << fixed6(kReferenceMeans[c]) << "\n";
  for (size_t i = 0; i < d; ++i) {
    const char* name = dml_model_feature_name(model.get(), i);
    std::cout << "importance," << (name ? name : "") << "," << fixed6(importance[i]) << ",,,\n";
  }
  return kOk;
}

struct SynthArgs {
  std::string kind, out;
  size_t rows = 0;
  double noise = 0.0;
  uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& a) {
  dml_dataset* raw = nullptr;
  check(dml_dataset_synth(a.kind.c_str(), a.rows, a.noise, a.seed, &raw), kUsage, "synth");
  DatasetPtr data(raw);
  check(dml_dataset_write_csv(data.get(), a.out.c_str(), "target"), kData, "writing '" + a.out + "'");
  std::cerr << "wrote " << a.rows << " rows to " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive per-sample ensemble of boosted trees and an MC-dropout network"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and save it");
  train_cmd->add_option("data", train_args.data, "training CSV")->required();
  train_cmd->add_option("--model,--out", train_args.model, "model file to write")->required();
  train_cmd->add_option("--target-col", train_args.target, "target column name");
  train_args.flags.attach(train_cmd);

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand("compare", "80/20 split, train, and compare against baselines");
  compare_cmd->add_option("data", compare_args.data, "CSV with target column")->required();
  compare_cmd->add_option("--target-col", compare_args.target, "target column name");
  compare_args.flags.attach(compare_cmd);

  ModelDataArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "per-row predictions with gate outputs");
  predict_cmd->add_option("data", predict_args.data, "feature CSV (target column optional)")->required();
  predict_cmd->add_option("--model", predict_args.model, "trained model file")->required();
  predict_cmd->add_option("--out", predict_args.out, "write CSV here instead of stdout");
  predict_cmd->add_option("--target-col", predict_args.target, "target column name to ignore");

  ModelDataArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "gate selection statistics and mean importances");
  inspect_cmd->add_option("data", inspect_args.data, "feature CSV (target column optional)")->required();
  inspect_cmd->add_option("--model", inspect_args.model, "trained model file")->required();
  inspect_cmd->add_option("--target-col", inspect_args.target, "target column name to ignore");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic regression dataset");
  synth_cmd->add_option("kind", synth_args.kind, "linear, tree or two-regime")->required();
  synth_cmd->add_option("--rows", synth_args.rows, "number of rows")->required();
  synth_cmd->add_option("--noise", synth_args.noise, "standard deviation of Gaussian target noise");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_option("--out", synth_args.out, "CSV file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*compare_cmd) return cmd_compare(compare_args);
    if (*predict_cmd) return cmd_predict(predict_args);
    if (*inspect_cmd) return cmd_inspect(inspect_args);
    if (*synth_cmd) return cmd_synth(synth_args);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
