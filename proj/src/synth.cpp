#include <cmath>
#include <string>

#include "dml/error.hpp"
#include "dml/io.hpp"

namespace dml::io {

namespace {

constexpr double kLinearWeights[8] = {1.5, -2.0, 0.8, 0.3, -0.6, 1.1, 0.0, 0.25};
constexpr double kLinearIntercept = 0.5;

double tree_target(std::span<const double> x) {
  if (x[0] < 0.0) return x[1] < 0.3 ? -3.0 : -1.0;
  return x[2] < -0.2 ? 2.0 : 4.0;
}

// Regime 0: axis-aligned steps, cheap for trees and hard for a smooth network.
double step_target(std::span<const double> x) {
  double y = 0.0;
  y += x[0] > 0.5 ? 2.0 : 0.0;
  y += x[1] < -0.3 ? -1.5 : 0.0;
  y += x[2] > 1.0 ? 1.2 : -0.4;
  y += (x[3] > 0.0 && x[0] < -1.0) ? 1.0 : 0.0;
  return y;
}

// Regime 1: an oblique, gently curved surface. Every feature matters and no
// axis-aligned split captures it well, while a network fits it easily.
double smooth_target(std::span<const double> x) {
  const double u = 0.6 * x[0] - 0.5 * x[1] + 0.4 * x[2] + 0.45 * x[3] - 0.35 * x[4] + 0.3 * x[5];
  return 1.2 * u + 0.3 * std::sin(x[0] + x[2]);
}

}  // namespace

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "linear") return SynthKind::linear;
  if (name == "tree") return SynthKind::tree;
  if (name == "two-regime" || name == "two_regime") return SynthKind::two_regime;
  throw InvalidInput("unknown synthetic kind '" + std::string(name) +
                     "' (expected linear, tree or two-regime)");
}

numkit::Dataset synthesize(SynthKind kind, std::size_t rows, double noise_std, std::uint64_t seed) {
  if (rows == 0) throw InvalidInput("synthesize: need at least one row");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw InvalidInput("synthesize: noise_std must be a finite value >= 0");

  numkit::Rng rng(numkit::mix_seed(seed, 0x5e7d));
  numkit::Dataset data;
  std::size_t d = 0;
  switch (kind) {
    case SynthKind::linear:
      d = 8;
      for (std::size_t i = 0; i < d; ++i) data.feature_names.push_back("x" + std::to_string(i + 1));
      break;
    case SynthKind::tree:
      d = 6;
      for (std::size_t i = 0; i < d; ++i) data.feature_names.push_back("x" + std::to_string(i + 1));
      break;
    case SynthKind::two_regime:
      d = 7;
      data.feature_names.push_back("regime");
      for (std::size_t i = 1; i < d; ++i) data.feature_names.push_back("x" + std::to_string(i));
      break;
  }
  data.features = numkit::Matrix(rows, d);
  data.targets.resize(rows);

  for (std::size_t r = 0; r < rows; ++r) {
    auto x = data.features.row(r);
    double y = 0.0;
    switch (kind) {
      case SynthKind::linear:
        y = kLinearIntercept;
        for (std::size_t i = 0; i < d; ++i) {
          x[i] = rng.uniform(-1.0, 1.0);
          y += kLinearWeights[i] * x[i];
        }
        break;
      case SynthKind::tree:
        for (std::size_t i = 0; i < d; ++i) x[i] = rng.uniform(-1.0, 1.0);
        y = tree_target(x);
        break;
      case SynthKind::two_regime: {
        x[0] = static_cast<double>(r % 2);
        for (std::size_t i = 1; i < d; ++i) x[i] = rng.uniform(-2.0, 2.0);
        const auto inputs = x.subspan(1);
        y = x[0] == 0.0 ? step_target(inputs) : smooth_target(inputs);
        break;
      }
    }
    data.targets[r] = y + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
  }
  return data;
}

}  // namespace dml::io
