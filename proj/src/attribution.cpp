#include "dml/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dml/error.hpp"

namespace dml::attribution {

using numkit::Vector;

void AttributionConfig::validate() const {
  if (steps == 0) throw InvalidInput("attribution: steps must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("attribution: lambda must lie in [0, 1]");
}

Vector integrated_gradients(const nn::MlpModel& model, std::span<const double> x,
                            const AttributionConfig& config) {
  config.validate();
  const std::size_t d = x.size();
  if (d != model.input_dim())
    throw InvalidInput("integrated_gradients: expected " + std::to_string(model.input_dim()) +
                       " features, got " + std::to_string(d));
  Vector baseline = config.baseline.empty() ? Vector(d, 0.0) : config.baseline;
  if (baseline.size() != d) throw InvalidInput("integrated_gradients: baseline length mismatch");

  Vector delta(d);
  bool on_baseline = true;
  for (std::size_t i = 0; i < d; ++i) {
    delta[i] = x[i] - baseline[i];
    on_baseline = on_baseline && delta[i] == 0.0;
  }
  if (on_baseline) return Vector(d, 0.0);

  Vector grad_sum(d, 0.0);
  Vector point(d);
  const double m = static_cast<double>(config.steps);
  for (std::size_t j = 0; j < config.steps; ++j) {
    const double alpha = (static_cast<double>(j) + 0.5) / m;
    for (std::size_t i = 0; i < d; ++i) point[i] = baseline[i] + alpha * delta[i];
    const Vector g = nn::input_gradient(model, point);
    for (std::size_t i = 0; i < d; ++i) grad_sum[i] += g[i];
  }
  Vector ig(d);
  for (std::size_t i = 0; i < d; ++i) ig[i] = delta[i] * grad_sum[i] / m;
  return ig;
}

namespace {

Vector l1_normalized_abs(std::span<const double> v) {
  Vector out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::abs(v[i]);
    total += out[i];
  }
  if (total > 0.0)
    for (double& e : out) e /= total;
  return out;
}

}  // namespace

Vector combined_importance(std::span<const double> xgb_importance, std::span<const double> ig,
                           double lambda) {
  if (xgb_importance.size() != ig.size())
    throw InvalidInput("combined_importance: length mismatch (" +
                       std::to_string(xgb_importance.size()) + " vs " + std::to_string(ig.size()) +
                       ")");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InvalidInput("combined_importance: lambda must lie in [0, 1]");
  for (double v : xgb_importance)
    if (!(v >= 0.0)) throw InvalidInput("combined_importance: tree importances must be >= 0");
  for (double v : ig)
    if (!std::isfinite(v)) throw InvalidInput("combined_importance: non-finite attribution");

  const Vector tree = l1_normalized_abs(xgb_importance);
  const Vector net = l1_normalized_abs(ig);
  // An all-zero side carries no ranking, so its weight moves to the other side
  // and the result stays a distribution.
  const auto all_zero = [](const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return e == 0.0; });
  };
  double weight = lambda;
  if (all_zero(tree) && !all_zero(net)) weight = 0.0;
  if (all_zero(net) && !all_zero(tree)) weight = 1.0;
  Vector out(tree.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weight * tree[i] + (1.0 - weight) * net[i];
  return out;
}

}  // namespace dml::attribution
