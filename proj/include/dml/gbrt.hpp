#pragma once

// Gradient-boosted regression trees with squared-error loss and exact greedy
// split search.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dml/numkit.hpp"

namespace dml::gbrt {

/// One node of a flattened tree. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Leaf output in target units, before shrinkage.
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary regression tree stored as a node array; node 0 is the root.
/// Samples with x[feature] < threshold go left.
struct Tree {
  std::vector<TreeNode> nodes;

  double leaf_value(std::span<const double> x) const;
  std::size_t depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct GbrtConfig {
  std::size_t n_estimators = 150;
  double learning_rate = 0.08;
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 5;
  /// Fitting is fully deterministic; the seed is kept for interface symmetry
  /// with the other learners.
  std::uint64_t seed = 0;

  void validate() const;
};

struct GbrtModel {
  double base_score = 0.0;
  double learning_rate = 0.0;
  std::vector<Tree> trees;
  /// Normalized total split gain per feature (all zero if no split exists).
  numkit::Vector gain_importance;

  std::size_t input_dim() const noexcept { return gain_importance.size(); }
  friend bool operator==(const GbrtModel&, const GbrtModel&) = default;
};

/// Best split of a sample set. `found` is false when no admissible split
/// improves the squared error.
struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Tie rule shared by the split search and its tests: a candidate replaces
/// the incumbent only if its gain exceeds the incumbent's by more than a
/// relative 1e-12 (features and thresholds are scanned in ascending order, so
/// ties keep the lowest feature index, then the lowest threshold).
bool improves_on(double candidate_gain, double incumbent_gain) noexcept;

/// Exhaustive root split search on (features, residuals), honouring
/// min_samples_leaf. Exposed for inspection and testing.
SplitCandidate best_root_split(const numkit::Matrix& features, std::span<const double> residuals,
                               std::size_t min_samples_leaf);

GbrtModel fit_gbrt(const numkit::Dataset& train, const GbrtConfig& config);

double gbrt_predict(const GbrtModel& model, std::span<const double> x);

/// Entry k is learning_rate * leaf value of tree k at x.
numkit::Vector per_tree_contributions(const GbrtModel& model, std::span<const double> x);

/// Population variance of the per-tree contributions.
double confidence_xgb(const GbrtModel& model, std::span<const double> x);

}  // namespace dml::gbrt
