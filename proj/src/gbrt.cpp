#include "dml/gbrt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dml/error.hpp"

namespace dml::gbrt {

using numkit::Dataset;
using numkit::Matrix;
using numkit::Vector;

double Tree::leaf_value(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

void GbrtConfig::validate() const {
  if (n_estimators == 0) throw InvalidInput("gbrt: n_estimators must be positive");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw InvalidInput("gbrt: learning_rate must lie in (0, 1]");
  if (max_depth == 0) throw InvalidInput("gbrt: max_depth must be positive");
  if (min_samples_leaf == 0) throw InvalidInput("gbrt: min_samples_leaf must be positive");
}

bool improves_on(double candidate_gain, double incumbent_gain) noexcept {
  return candidate_gain > incumbent_gain + 1e-12 * std::abs(incumbent_gain);
}

namespace {

/// Splits must remove more than this fraction of the node's uncentered sum of
/// squares; rejects round-off "gains" on constant residuals.
constexpr double kMinRelativeGain = 1e-12;

double midpoint(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return mid > lo ? mid : hi;
}

/// Exact greedy builder over presorted per-feature index arrays. Each node
/// owns the same [begin, end) range in every feature's order array.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& features, const std::vector<std::vector<std::uint32_t>>& sorted,
              std::span<const double> residuals, const GbrtConfig& config, Vector& gain_totals)
      : features_(features),
        order_(sorted),
        residuals_(residuals),
        config_(config),
        gain_totals_(gain_totals),
        goes_left_(features.rows(), 0),
        scratch_(features.rows()) {}

  Tree build() {
    tree_.nodes.clear();
    grow(0, features_.rows(), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    const std::size_t n = end - begin;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double r = residuals_[order_[0][i]];
      sum += r;
      sum_sq += r * r;
    }

    SplitCandidate best;
    if (depth < config_.max_depth && n >= 2 * config_.min_samples_leaf)
      best = search(begin, end, sum, sum_sq);

    if (!best.found) {
      tree_.nodes[static_cast<std::size_t>(index)].value = sum / static_cast<double>(n);
      return index;
    }

    gain_totals_[static_cast<std::size_t>(best.feature)] += best.gain;
    const std::size_t mid = partition(begin, end, best);
    const auto left = grow(begin, mid, depth + 1);
    const auto right = grow(mid, end, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  SplitCandidate search(std::size_t begin, std::size_t end, double sum, double sum_sq) const {
    const std::size_t n = end - begin;
    const std::size_t min_leaf = config_.min_samples_leaf;
    const double parent_score = sum * sum / static_cast<double>(n);
    SplitCandidate best;
    for (std::size_t f = 0; f < features_.cols(); ++f) {
      const auto& order = order_[f];
      double left_sum = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        left_sum += residuals_[order[i]];
        const std::size_t n_left = i - begin + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        const double lo = features_(order[i], f);
        const double hi = features_(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) - parent_score;
        if (!best.found ? gain > 0.0 : improves_on(gain, best.gain)) {
          best = {true, static_cast<int>(f), midpoint(lo, hi), gain};
        }
      }
    }
    if (best.found && !(best.gain > kMinRelativeGain * sum_sq)) best.found = false;
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const SplitCandidate& split) {
    const auto f = static_cast<std::size_t>(split.feature);
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto s = order_[f][i];
      goes_left_[s] = features_(s, f) < split.threshold ? 1 : 0;
      n_left += goes_left_[s];
    }
    for (auto& order : order_) {
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto s = order[i];
        if (goes_left_[s])
          order[l++] = s;
        else
          scratch_[r++] = s;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
                order.begin() + static_cast<std::ptrdiff_t>(l));
    }
    return begin + n_left;
  }

  const Matrix& features_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::span<const double> residuals_;
  const GbrtConfig& config_;
  Vector& gain_totals_;
  std::vector<unsigned char> goes_left_;
  std::vector<std::uint32_t> scratch_;
  Tree tree_;
};

std::vector<std::vector<std::uint32_t>> presort(const Matrix& features) {
  std::vector<std::vector<std::uint32_t>> sorted(features.cols());
  for (std::size_t f = 0; f < features.cols(); ++f) {
    auto& order = sorted[f];
    order.resize(features.rows());
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return features(a, f) < features(b, f);
    });
  }
  return sorted;
}

void check_input(const GbrtModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    throw InvalidInput("gbrt: expected " + std::to_string(model.input_dim()) +
                       " features, got " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidInput("gbrt: non-finite input");
}

}  // namespace

SplitCandidate best_root_split(const Matrix& features, std::span<const double> residuals,
                               std::size_t min_samples_leaf) {
  if (features.rows() != residuals.size())
    throw InvalidInput("best_root_split: row/residual count mismatch");
  GbrtConfig config;
  config.max_depth = 1;
  config.min_samples_leaf = min_samples_leaf;
  Vector gains(features.cols(), 0.0);
  TreeBuilder builder(features, presort(features), residuals, config, gains);
  const Tree stump = builder.build();
  SplitCandidate out;
  if (!stump.nodes.front().is_leaf()) {
    out.found = true;
    out.feature = stump.nodes.front().feature;
    out.threshold = stump.nodes.front().threshold;
    out.gain = gains[static_cast<std::size_t>(out.feature)];
  }
  return out;
}

GbrtModel fit_gbrt(const Dataset& train, const GbrtConfig& config) {
  config.validate();
  train.validate();
  const std::size_t n = train.size();
  if (n < 2 * config.min_samples_leaf)
    throw InvalidInput("gbrt: need at least " + std::to_string(2 * config.min_samples_leaf) +
                       " rows, got " + std::to_string(n));

  GbrtModel model;
  model.learning_rate = config.learning_rate;
  const bool constant =
      std::all_of(train.targets.begin(), train.targets.end(),
                  [&](double y) { return y == train.targets.front(); });
  model.base_score = constant ? train.targets.front() : numkit::mean(train.targets);

  const auto sorted = presort(train.features);
  Vector prediction(n, model.base_score);
  Vector residuals(n);
  Vector gain_totals(train.dim(), 0.0);
  model.trees.reserve(config.n_estimators);

  for (std::size_t k = 0; k < config.n_estimators; ++k) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = train.targets[i] - prediction[i];
    TreeBuilder builder(train.features, sorted, residuals, config, gain_totals);
    model.trees.push_back(builder.build());
    const Tree& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i)
      prediction[i] += config.learning_rate * tree.leaf_value(train.features.row(i));
  }

  const double total = std::accumulate(gain_totals.begin(), gain_totals.end(), 0.0);
  if (total > 0.0)
    for (double& g : gain_totals) g /= total;
  model.gain_importance = std::move(gain_totals);
  return model;
}

double gbrt_predict(const GbrtModel& model, std::span<const double> x) {
  check_input(model, x);
  double out = model.base_score;
  for (const auto& tree : model.trees) out += model.learning_rate * tree.leaf_value(x);
  return out;
}

Vector per_tree_contributions(const GbrtModel& model, std::span<const double> x) {
  check_input(model, x);
  Vector out(model.trees.size());
  for (std::size_t k = 0; k < model.trees.size(); ++k)
    out[k] = model.learning_rate * model.trees[k].leaf_value(x);
  return out;
}

double confidence_xgb(const GbrtModel& model, std::span<const double> x) {
  if (model.trees.empty()) throw InvalidInput("confidence_xgb: model has no trees");
  return numkit::variance(per_tree_contributions(model, x));
}

}  // namespace dml::gbrt
