#include "dml/numkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "dml/error.hpp"

namespace dml {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::undefined_metric: return "undefined metric";
    case ErrorCode::diverged_training: return "diverged training";
    case ErrorCode::unsupported_format: return "unsupported format";
    case ErrorCode::parse_error: return "parse error";
    case ErrorCode::schema_error: return "schema error";
    case ErrorCode::io_error: return "i/o error";
  }
  return "unknown error";
}

}  // namespace dml

namespace dml::numkit {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                       " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw InvalidInput(std::string(what) + ": empty input");
}

}  // namespace

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_)
    throw InvalidInput("append_row: expected " + std::to_string(cols_) + " values, got " +
                       std::to_string(values.size()));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Dataset::validate(bool allow_empty) const {
  if (!allow_empty && features.rows() == 0) throw InvalidInput("dataset has no rows");
  if (features.cols() == 0) throw InvalidInput("dataset has no features");
  if (targets.size() != features.rows())
    throw InvalidInput("dataset has " + std::to_string(features.rows()) + " rows but " +
                       std::to_string(targets.size()) + " targets");
  if (feature_names.size() != features.cols())
    throw InvalidInput("dataset has " + std::to_string(features.cols()) + " features but " +
                       std::to_string(feature_names.size()) + " names");
  for (double v : features.data())
    if (!std::isfinite(v)) throw InvalidInput("dataset contains a non-finite feature value");
  for (double v : targets)
    if (!std::isfinite(v)) throw InvalidInput("dataset contains a non-finite target");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = Matrix(indices.size(), dim());
  out.targets.resize(indices.size());
  out.feature_names = feature_names;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.targets[i] = targets[indices[i]];
  }
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_values(std::span<const double> values) noexcept {
  // FNV-1a over the IEEE bit patterns; -0.0 and 0.0 hash identically.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; one draw per call keeps the stream position simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  // Rejection sampling on the top of the range avoids modulo bias.
  const std::uint64_t bound = n;
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t cutoff = max - (max % bound + 1) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r <= cutoff) return static_cast<std::size_t>(r % bound);
  }
}

// ---------------------------------------------------------------------------

void Standardizer::apply_in_place(std::span<double> x) const {
  if (x.size() != dim())
    throw InvalidInput("standardizer expects " + std::to_string(dim()) + " values, got " +
                       std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - means[i]) / stds[i];
}

Vector Standardizer::apply(std::span<const double> x) const {
  Vector out(x.begin(), x.end());
  apply_in_place(out);
  return out;
}

Vector Standardizer::invert(std::span<const double> z) const {
  if (z.size() != dim())
    throw InvalidInput("standardizer expects " + std::to_string(dim()) + " values, got " +
                       std::to_string(z.size()));
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * stds[i] + means[i];
  return out;
}

Matrix Standardizer::apply(const Matrix& m) const {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) apply_in_place(out.row(r));
  return out;
}

std::pair<double, double> mean_and_scale(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean_and_scale: empty input");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  // Relative cutoff so columns that are constant up to rounding are treated
  // as constant.
  const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(m)));
  return {m, constant ? 1.0 : sd};
}

Standardizer standardize_fit(const Matrix& features) {
  if (features.rows() == 0 || features.cols() == 0)
    throw InvalidInput("standardize_fit: empty dataset");
  Standardizer s;
  s.means.resize(features.cols());
  s.stds.resize(features.cols());
  Vector column(features.rows());
  for (std::size_t c = 0; c < features.cols(); ++c) {
    for (std::size_t r = 0; r < features.rows(); ++r) column[r] = features(r, c);
    std::tie(s.means[c], s.stds[c]) = mean_and_scale(column);
  }
  return s;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5317));
  rng.shuffle(order);
  return order;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& split) {
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw InvalidInput("train_test_split: train_fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * split.train_fraction));
  const auto order = split_permutation(n, split.seed);
  const std::span<const std::size_t> all(order);
  return {data.subset(all.first(n_train)), data.subset(all.subspan(n_train))};
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean: empty input");
  // Identical values have that value as their exact mean (and zero variance).
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
    return values.front();
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred, truth, "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred, truth, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred, truth, "r2");
  const double m = mean(truth);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    ss_tot += (truth[i] - m) * (truth[i] - m);
  }
  if (ss_tot == 0.0) throw UndefinedMetric("r2: truth is constant");
  return 1.0 - ss_res / ss_tot;
}

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth) {
  return {rmse(pred, truth), mae(pred, truth), r2(pred, truth)};
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  for (double v : logits)
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite logit");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace dml::numkit
