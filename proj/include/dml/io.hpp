#pragma once

// Tabular input/output: CSV datasets, run configuration files and the
// synthetic benchmark generators.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dml/numkit.hpp"
#include "dml/pipeline.hpp"

namespace dml::io {

// CSV ---------------------------------------------------------------------

/// Comma-separated, header row required. The target column is taken out by
/// name; every other column is a real-valued feature in header order.
struct CsvOptions {
  std::string target_column = "target";
  /// Accept files without the target column (targets are then all zero).
  bool target_optional = false;
  /// Accept a header with no data rows.
  bool allow_empty = false;
};

struct CsvTable {
  numkit::Dataset data;
  bool has_target = false;
};

/// Throws SchemaError with 1-based (line, column) coordinates.
CsvTable parse_csv(std::string_view text, const CsvOptions& options);
CsvTable read_csv(const std::string& path, const CsvOptions& options);

/// Writes features then the target column, values in shortest round-trip form.
std::string format_csv(const numkit::Dataset& data, const std::string& target_column);
void write_csv(const numkit::Dataset& data, const std::string& path,
               const std::string& target_column);

// Run configuration -------------------------------------------------------

/// Flat key=value settings mirroring DmlConfig plus the evaluation split.
/// Unknown keys are rejected; unspecified keys keep the reference defaults.
class RunConfig {
 public:
  RunConfig() = default;

  /// Throws InvalidInput for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// `#` starts a comment; blank lines are ignored.
  void load(std::string_view text, const std::string& origin = "config");
  void load_file(const std::string& path);

  /// Every key with its effective value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  static const std::vector<std::string>& keys();

  const pipeline::DmlConfig& dml() const noexcept { return dml_; }
  pipeline::DmlConfig& dml() noexcept { return dml_; }
  const double& train_fraction() const noexcept { return train_fraction_; }
  double& train_fraction() noexcept { return train_fraction_; }

 private:
  pipeline::DmlConfig dml_;
  double train_fraction_ = 0.8;
};

// Synthetic data ----------------------------------------------------------

enum class SynthKind { linear, tree, two_regime };

/// Throws InvalidInput for an unknown name.
SynthKind parse_synth_kind(std::string_view name);

/// Deterministic per seed.
///  - linear: 8 uniform features, affine target.
///  - tree: 6 uniform features, target is a depth-2 axis-aligned tree.
///  - two_regime: a `regime` indicator plus 6 features; even rows (regime 0)
///    follow an axis-aligned step function, odd rows (regime 1) a smooth
///    function of feature interactions.
/// Gaussian noise with standard deviation noise_std is added to the target.
numkit::Dataset synthesize(SynthKind kind, std::size_t rows, double noise_std, std::uint64_t seed);

}  // namespace dml::io
