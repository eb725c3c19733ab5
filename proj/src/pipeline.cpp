#include "dml/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dml/error.hpp"

namespace dml::pipeline {

namespace {

// Seed tags for the components derived from DmlConfig::seed.
constexpr std::uint64_t kTagGbrt = 10;
constexpr std::uint64_t kTagMlp = 11;
constexpr std::uint64_t kTagGate = 12;
constexpr std::uint64_t kTagMetaSplit = 13;

template <typename Fn>
auto in_phase(const std::string& phase, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "phase '" + phase + "': " + e.what());
  }
}

}  // namespace

void DmlConfig::validate() const {
  gbrt.validate();
  mlp.validate();
  gate.validate();
  attribution.validate();
  if (mc_samples == 0) throw InvalidInput("mc_samples must be positive");
  if (!(meta_fraction > 0.0 && meta_fraction < 1.0))
    throw InvalidInput("meta_fraction must lie in (0, 1)");
}

void DmlModel::validate() const {
  const std::size_t d = input_dim();
  if (d == 0) throw InvalidInput("model has no features");
  if (feature_standardizer.stds.size() != d) throw InvalidInput("feature standardizer is malformed");
  if (feature_names.size() != d) throw InvalidInput("model feature names do not match D");
  if (gbrt.input_dim() != d) throw InvalidInput("tree ensemble dimension does not match D");
  if (gbrt.trees.empty()) throw InvalidInput("tree ensemble is empty");
  if (mlp.input_dim() != d || mlp.net.output_dim() != 1)
    throw InvalidInput("network dimensions do not match D");
  const meta::MetaLayout layout{d};
  if (gate.input_dim() != layout.size() || gate.net.output_dim() != 3)
    throw InvalidInput("gate expects " + std::to_string(gate.input_dim()) + " inputs, layout has " +
                       std::to_string(layout.size()));
  if (meta_standardizer.dim() != layout.size() || meta_standardizer.stds.size() != layout.size())
    throw InvalidInput("meta standardizer does not match the meta-feature layout");
  if (!attribution.baseline.empty() && attribution.baseline.size() != d)
    throw InvalidInput("attribution baseline does not match D");
  if (mc_samples == 0) throw InvalidInput("mc_samples must be positive");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> meta_split(std::size_t n,
                                                                         double meta_fraction,
                                                                         std::uint64_t seed) {
  const auto n_meta =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * meta_fraction));
  const auto order = numkit::split_permutation(n, numkit::mix_seed(seed, kTagMetaSplit));
  std::vector<std::size_t> meta(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_meta));
  std::vector<std::size_t> base(order.begin() + static_cast<std::ptrdiff_t>(n_meta), order.end());
  return {std::move(base), std::move(meta)};
}

std::uint64_t sample_seed(std::uint64_t model_seed, std::span<const double> x_raw) {
  return numkit::mix_seed(model_seed, numkit::hash_values(x_raw));
}

BaseOutputs base_outputs(const DmlModel& model, std::span<const double> x_raw) {
  if (x_raw.size() != model.input_dim())
    throw InvalidInput("expected " + std::to_string(model.input_dim()) + " features, got " +
                       std::to_string(x_raw.size()));
  for (double v : x_raw)
    if (!std::isfinite(v)) throw InvalidInput("input contains a non-finite value");

  const Vector x = model.feature_standardizer.apply(x_raw);
  BaseOutputs out;
  const Vector contributions = gbrt::per_tree_contributions(model.gbrt, x);
  out.y_xgb = gbrt::gbrt_predict(model.gbrt, x);
  out.c_xgb = numkit::variance(contributions);

  const nn::McPrediction mc =
      nn::mc_predict(model.mlp, x, model.mc_samples, sample_seed(model.seed, x_raw));
  out.y_nn = mc.mean;
  out.c_nn = nn::confidence_nn(mc);

  const Vector ig = attribution::integrated_gradients(model.mlp, x, model.attribution);
  out.importance =
      attribution::combined_importance(model.gbrt.gain_importance, ig, model.attribution.lambda);
  out.meta_features =
      meta::build_meta_features(x, out.c_xgb, out.c_nn, out.importance, out.y_xgb, out.y_nn);
  return out;
}

PredictionReport predict_dml(const DmlModel& model, std::span<const double> x_raw) {
  BaseOutputs base = base_outputs(model, x_raw);
  const Vector z = model.meta_standardizer.apply(base.meta_features);

  PredictionReport report;
  report.y_xgb = base.y_xgb;
  report.y_nn = base.y_nn;
  report.c_xgb = base.c_xgb;
  report.c_nn = base.c_nn;
  report.importance = std::move(base.importance);
  report.p = meta::gate_forward(model.gate, z);
  std::tie(report.w_xgb, report.w_nn) = meta::gating_weights(report.p);
  const double combined = report.w_xgb * report.y_xgb + report.w_nn * report.y_nn;
  // Weights sum to 1 up to rounding; clamp so the result stays in the hull.
  report.prediction = std::clamp(combined, std::min(report.y_xgb, report.y_nn),
                                 std::max(report.y_xgb, report.y_nn));
  return report;
}

std::vector<PredictionReport> predict_all(const DmlModel& model, const numkit::Matrix& x_raw) {
  std::vector<PredictionReport> reports;
  reports.reserve(x_raw.rows());
  for (std::size_t i = 0; i < x_raw.rows(); ++i) reports.push_back(predict_dml(model, x_raw.row(i)));
  return reports;
}

DmlModel train_dml(const Dataset& train, const DmlConfig& config, const ProgressFn& progress) {
  auto log = [&](const std::string& phase, const std::string& message) {
    if (progress) progress(phase, message);
  };
  config.validate();
  train.validate();

  auto [base_rows, meta_rows] = meta_split(train.size(), config.meta_fraction, config.seed);
  if (meta_rows.empty())
    throw InvalidInput("meta_fraction " + std::to_string(config.meta_fraction) +
                       " leaves no rows for meta-learning");

  DmlModel model;
  model.seed = config.seed;
  model.mc_samples = config.mc_samples;
  model.attribution = config.attribution;
  model.feature_names = train.feature_names;
  model.feature_standardizer = numkit::standardize_fit(train.features);

  Dataset base = train.subset(base_rows);
  base.features = model.feature_standardizer.apply(base.features);
  log("split", "base-learner rows " + std::to_string(base_rows.size()) + ", meta-learning rows " +
                   std::to_string(meta_rows.size()));

  // Phase 1: independent base learners on the base rows.
  in_phase("base learners", [&] {
    gbrt::GbrtConfig gc = config.gbrt;
    gc.seed = numkit::mix_seed(config.seed, kTagGbrt);
    model.gbrt = gbrt::fit_gbrt(base, gc);
    log("base learners", "tree ensemble fitted (" + std::to_string(model.gbrt.trees.size()) +
                             " trees)");
    nn::MlpConfig mc = config.mlp;
    mc.seed = numkit::mix_seed(config.seed, kTagMlp);
    const std::size_t report_every = std::max<std::size_t>(1, mc.epochs / 10);
    model.mlp = nn::fit_mlp(base, mc, [&](std::size_t epoch, double loss, const nn::MlpModel&) {
      if (epoch % report_every == 0 || epoch == mc.epochs)
        log("base learners", "network epoch " + std::to_string(epoch) + " loss " +
                                 std::to_string(loss));
    });
    return 0;
  });

  // Phase 2: meta-features on the held-out rows.
  meta::MetaSet set;
  in_phase("meta-features", [&] {
    const meta::MetaLayout layout{train.dim()};
    numkit::Matrix raw_z(meta_rows.size(), layout.size());
    set.y_xgb.resize(meta_rows.size());
    set.y_nn.resize(meta_rows.size());
    set.y.resize(meta_rows.size());
    for (std::size_t k = 0; k < meta_rows.size(); ++k) {
      const std::size_t i = meta_rows[k];
      const BaseOutputs out = base_outputs(model, train.features.row(i));
      std::copy(out.meta_features.begin(), out.meta_features.end(), raw_z.row(k).begin());
      set.y_xgb[k] = out.y_xgb;
      set.y_nn[k] = out.y_nn;
      set.y[k] = train.targets[i];
    }
    model.meta_standardizer = numkit::standardize_fit(raw_z);
    set.z = model.meta_standardizer.apply(raw_z);
    log("meta-features", "generated " + std::to_string(meta_rows.size()) + " meta-feature rows of " +
                             std::to_string(layout.size()) + " values");
    return 0;
  });

  // Phase 3: gate on the meta set.
  in_phase("meta-learner", [&] {
    meta::GateConfig gc = config.gate;
    gc.seed = numkit::mix_seed(config.seed, kTagGate);
    const std::size_t report_every = std::max<std::size_t>(1, gc.epochs / 10);
    model.gate = meta::fit_gate(set, gc, [&](std::size_t epoch, double loss) {
      if (epoch % report_every == 0 || epoch == gc.epochs)
        log("meta-learner", "gate epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
    });
    return 0;
  });

  model.validate();
  return model;
}

Evaluation evaluate(std::span<const PredictionReport> reports, std::span<const double> truth) {
  if (reports.empty()) throw InvalidInput("evaluate: empty test set");
  if (reports.size() != truth.size()) throw InvalidInput("evaluate: report/target count mismatch");
  const std::size_t n = reports.size();
  std::array<Vector, 4> preds;
  for (auto& p : preds) p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    preds[0][i] = r.y_xgb;
    preds[1][i] = r.y_nn;
    preds[2][i] = 0.5 * (r.y_xgb + r.y_nn);
    preds[3][i] = r.prediction;
  }
  Evaluation out;
  for (std::size_t b = 0; b < 4; ++b) out.rows[b] = numkit::regression_metrics(preds[b], truth);
  return out;
}

Evaluation evaluate(const DmlModel& model, const Dataset& test) {
  test.validate();
  const auto reports = predict_all(model, test.features);
  return evaluate(reports, test.targets);
}

SelectionStats selection_stats(std::span<const PredictionReport> reports) {
  if (reports.empty()) throw InvalidInput("selection_stats: no samples");
  SelectionStats s;
  s.count = reports.size();
  Vector column(reports.size());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < reports.size(); ++i) column[i] = reports[i].p[c];
    s.mean[c] = numkit::mean(column);
    s.stddev[c] = std::sqrt(numkit::variance(column));
  }
  for (const auto& r : reports) ++s.argmax_count[r.p.argmax()];
  for (std::size_t c = 0; c < 3; ++c)
    s.argmax_share[c] = static_cast<double>(s.argmax_count[c]) / static_cast<double>(s.count);
  return s;
}

SelectionStats selection_stats(const DmlModel& model, const Dataset& data) {
  data.validate();
  const auto reports = predict_all(model, data.features);
  return selection_stats(reports);
}

Vector mean_importance(std::span<const PredictionReport> reports) {
  if (reports.empty()) throw InvalidInput("mean_importance: no samples");
  Vector out(reports.front().importance.size(), 0.0);
  for (const auto& r : reports)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r.importance[i];
  for (double& v : out) v /= static_cast<double>(reports.size());
  return out;
}

}  // namespace dml::pipeline
