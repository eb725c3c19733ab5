#pragma once

// Numeric substrate: dense row-major matrices, datasets, seeded random
// streams, standardization, splitting, regression metrics and softmax.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dml::numkit {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Feature matrix plus target vector. Features are N x D, targets length N.
struct Dataset {
  Matrix features;
  Vector targets;
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws InvalidInput unless N >= 1, D >= 1, names match D and all
  /// values are finite. `allow_empty` relaxes N >= 1.
  void validate(bool allow_empty = false) const;

  /// Rows selected by `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

// ---------------------------------------------------------------------------
// Random streams

/// SplitMix64 finalizer. Used to derive independent seeds from a parent seed
/// and a tag (phase index, pass index, sample hash).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// Stable 64-bit hash of the bit patterns of a vector of doubles.
std::uint64_t hash_values(std::span<const double> values) noexcept;

/// Seeded generator with portable uniform and normal draws (std::mt19937_64
/// core; distribution transforms are done here so results do not depend on
/// the standard library implementation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Standardization

/// Column-wise z-scoring. Uses the population standard deviation; constant
/// columns get std 1.
struct Standardizer {
  Vector means;
  Vector stds;

  std::size_t dim() const noexcept { return means.size(); }

  void apply_in_place(std::span<double> x) const;
  Vector apply(std::span<const double> x) const;
  Vector invert(std::span<const double> z) const;
  Matrix apply(const Matrix& m) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Standardizer standardize_fit(const Matrix& features);
inline Standardizer standardize_fit(const Dataset& data) { return standardize_fit(data.features); }

/// Mean and population standard deviation of a vector. Constant vectors get
/// std 1 (the same rule used for feature columns).
std::pair<double, double> mean_and_scale(std::span<const double> values);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Seeded permutation split. First part has floor(N * fraction) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& split);

/// The permutation used by train_test_split, exposed for callers that need
/// to keep side data aligned with the split.
std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Statistics

double mean(std::span<const double> values);
/// Population variance (divides by the count).
double variance(std::span<const double> values);

double rmse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);
/// 1 - SS_res / SS_tot. Throws UndefinedMetric when truth is constant.
double r2(std::span<const double> pred, std::span<const double> truth);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;

  friend bool operator==(const RegressionMetrics&, const RegressionMetrics&) = default;
};

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth);

// ---------------------------------------------------------------------------

/// Numerically stable softmax (max subtraction).
Vector softmax(std::span<const double> logits);

}  // namespace dml::numkit
