#pragma once

// End-to-end ensemble: three-phase training, per-sample gated inference,
// baseline evaluation, selection statistics and model persistence.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dml/attribution.hpp"
#include "dml/gbrt.hpp"
#include "dml/metalearner.hpp"
#include "dml/neuralnet.hpp"
#include "dml/numkit.hpp"

namespace dml::pipeline {

using numkit::Dataset;
using numkit::Vector;

/// Full training configuration. Defaults reproduce the reference setup:
/// 150 trees / 0.08 / depth 8, MLP [128, 64, 32] x 150 epochs with dropout
/// 0.3, gate [128, 64] x 100 epochs, 100 Monte Carlo passes.
///
/// The `seed` fields inside the nested configs are ignored by train_dml;
/// every component seed is derived from DmlConfig::seed.
struct DmlConfig {
  gbrt::GbrtConfig gbrt;
  nn::MlpConfig mlp;
  meta::GateConfig gate;
  std::size_t mc_samples = 100;
  attribution::AttributionConfig attribution;
  /// Fraction of the training rows held out for meta-learning.
  double meta_fraction = 0.25;
  std::uint64_t seed = 42;

  void validate() const;
};

inline constexpr int kFormatVersion = 1;

struct DmlModel {
  gbrt::GbrtModel gbrt;
  nn::MlpModel mlp;
  meta::GatingNet gate;
  numkit::Standardizer feature_standardizer;
  numkit::Standardizer meta_standardizer;
  attribution::AttributionConfig attribution;
  std::size_t mc_samples = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  std::size_t input_dim() const noexcept { return feature_standardizer.dim(); }
  /// Throws InvalidInput if component dimensions disagree.
  void validate() const;
  friend bool operator==(const DmlModel&, const DmlModel&) = default;
};

struct PredictionReport {
  double prediction = 0.0;
  double y_xgb = 0.0;
  double y_nn = 0.0;
  meta::GateProbabilities p;
  double w_xgb = 0.5;
  double w_nn = 0.5;
  double c_xgb = 0.0;
  double c_nn = 0.0;
  Vector importance;
};

/// Progress sink: phase label and a free-form message.
using ProgressFn = std::function<void(const std::string& phase, const std::string& message)>;

/// Split of the training rows used by train_dml: (base-learner rows,
/// meta-learning rows), as indices into the training set.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> meta_split(std::size_t n,
                                                                         double meta_fraction,
                                                                         std::uint64_t seed);

DmlModel train_dml(const Dataset& train, const DmlConfig& config, const ProgressFn& progress = {});

/// Base-learner outputs and meta-features for one raw input, without the gate.
struct BaseOutputs {
  double y_xgb = 0.0;
  double y_nn = 0.0;
  double c_xgb = 0.0;
  double c_nn = 0.0;
  Vector importance;
  Vector meta_features;  ///< unstandardized
};

BaseOutputs base_outputs(const DmlModel& model, std::span<const double> x_raw);

/// Seed for the Monte Carlo passes of one input: mix of the model seed and a
/// hash of the raw feature values.
std::uint64_t sample_seed(std::uint64_t model_seed, std::span<const double> x_raw);

PredictionReport predict_dml(const DmlModel& model, std::span<const double> x_raw);

std::vector<PredictionReport> predict_all(const DmlModel& model, const numkit::Matrix& x_raw);

enum class Baseline : std::size_t { gbrt = 0, nn = 1, simple_average = 2, dml = 3 };
inline constexpr std::array<const char*, 4> kBaselineNames{"gbrt", "nn", "simple_average", "dml"};

struct Evaluation {
  std::array<numkit::RegressionMetrics, 4> rows;  ///< indexed by Baseline

  const numkit::RegressionMetrics& operator[](Baseline b) const {
    return rows[static_cast<std::size_t>(b)];
  }
  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

Evaluation evaluate(const DmlModel& model, const Dataset& test);
Evaluation evaluate(std::span<const PredictionReport> reports, std::span<const double> truth);

struct SelectionStats {
  std::size_t count = 0;
  std::array<double, 3> mean{};   ///< per class: xgb, nn, hybrid
  std::array<double, 3> stddev{};  ///< population
  std::array<std::size_t, 3> argmax_count{};
  std::array<double, 3> argmax_share{};
};

SelectionStats selection_stats(const DmlModel& model, const Dataset& data);
SelectionStats selection_stats(std::span<const PredictionReport> reports);

/// Mean of the per-sample fused importance vectors (a distribution over
/// features whenever each per-sample vector is one).
Vector mean_importance(std::span<const PredictionReport> reports);

// Persistence -------------------------------------------------------------

/// Versioned line-oriented text; every double is written as a C99 hex float
/// so a round trip is bit-exact.
std::string serialize_model(const DmlModel& model);
/// Throws ParseError (with byte offset) or UnsupportedFormat.
DmlModel parse_model(const std::string& text);

void save_model(const DmlModel& model, const std::string& path);
DmlModel load_model(const std::string& path);

}  // namespace dml::pipeline
