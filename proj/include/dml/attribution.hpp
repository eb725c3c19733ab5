#pragma once

// Integrated Gradients for the regression MLP and its fusion with the
// tree ensemble's global gain importances.

#include <cstddef>
#include <span>

#include "dml/neuralnet.hpp"
#include "dml/numkit.hpp"

namespace dml::attribution {

struct AttributionConfig {
  /// Reference input x'. Empty means the all-zero vector, i.e. the training
  /// feature means once features are standardized.
  numkit::Vector baseline;
  std::size_t steps = 50;
  /// Weight of the tree importances in the fused vector.
  double lambda = 0.5;

  void validate() const;
  friend bool operator==(const AttributionConfig&, const AttributionConfig&) = default;
};

/// Midpoint Riemann approximation of the path integral from the baseline to
/// x: IG_i = (x_i - x'_i) * mean_j dF/dx_i(x' + (j - 1/2)/m (x - x')).
numkit::Vector integrated_gradients(const nn::MlpModel& model, std::span<const double> x,
                                    const AttributionConfig& config);

/// lambda * normalize(xgb_importance) + (1 - lambda) * normalize(|ig|), where
/// normalize scales a nonnegative vector to unit sum and leaves zeros alone.
numkit::Vector combined_importance(std::span<const double> xgb_importance,
                                   std::span<const double> ig, double lambda);

}  // namespace dml::attribution
