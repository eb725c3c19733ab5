#pragma once

// Gating meta-learner: meta-feature assembly, the softmax gate over
// {tree ensemble, network, hybrid average}, its regularized loss and training.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dml/neuralnet.hpp"
#include "dml/numkit.hpp"

namespace dml::meta {

using numkit::Matrix;
using numkit::Vector;

/// Meta-feature layout for D raw features, total 2D + 4 entries:
///
///   [0, D)        standardized raw features x
///   D             c_xgb, variance of per-tree contributions
///   D + 1         c_nn, Monte Carlo dropout variance
///   [D + 2, 2D+2) fused feature importance I
///   2D + 2        y_xgb, tree ensemble prediction
///   2D + 3        y_nn, network MC-mean prediction
struct MetaLayout {
  std::size_t d = 0;

  std::size_t size() const noexcept { return 2 * d + 4; }
  std::size_t x_begin() const noexcept { return 0; }
  std::size_t c_xgb() const noexcept { return d; }
  std::size_t c_nn() const noexcept { return d + 1; }
  std::size_t importance_begin() const noexcept { return d + 2; }
  std::size_t y_xgb() const noexcept { return 2 * d + 2; }
  std::size_t y_nn() const noexcept { return 2 * d + 3; }
};

Vector build_meta_features(std::span<const double> x, double c_xgb, double c_nn,
                           std::span<const double> importance, double y_xgb, double y_nn);

struct GateProbabilities {
  double p_xgb = 1.0 / 3.0;
  double p_nn = 1.0 / 3.0;
  double p_hybrid = 1.0 / 3.0;

  double operator[](std::size_t c) const noexcept {
    return c == 0 ? p_xgb : (c == 1 ? p_nn : p_hybrid);
  }
  /// 0 = tree ensemble, 1 = network, 2 = hybrid; lowest index wins ties.
  std::size_t argmax() const noexcept;
};

GateProbabilities to_probabilities(std::span<const double> logits);

/// Network mapping meta-features to 3 logits (no dropout).
struct GatingNet {
  nn::Network net;

  std::size_t input_dim() const noexcept { return net.input_dim(); }
  friend bool operator==(const GatingNet&, const GatingNet&) = default;
};

GateProbabilities gate_forward(const GatingNet& gate, std::span<const double> z);

/// Convex weights on the two base predictions: the hybrid mass is split
/// evenly, so w_xgb = p_xgb + p_hybrid / 2 and w_nn = p_nn + p_hybrid / 2.
std::pair<double, double> gating_weights(const GateProbabilities& p);

/// p_xgb * y_xgb + p_nn * y_nn + p_hybrid * (y_xgb + y_nn) / 2.
double combine(const GateProbabilities& p, double y_xgb, double y_nn);

/// KL(p || uniform) = sum_c p_c ln(3 p_c), with 0 ln 0 = 0.
double kl_from_uniform(const GateProbabilities& p);

/// Mean squared error of the gated combination plus alpha times the mean KL
/// divergence from uniform.
double meta_loss(std::span<const GateProbabilities> p, std::span<const double> y_xgb,
                 std::span<const double> y_nn, std::span<const double> y, double alpha);

/// Validation-set material for gate training. `z` rows are meta-feature
/// vectors (already standardized).
struct MetaSet {
  Matrix z;
  Vector y_xgb;
  Vector y_nn;
  Vector y;

  std::size_t size() const noexcept { return z.rows(); }
  void validate() const;
};

/// meta_loss over `batch` rows of `set` evaluated through `gate`, and its
/// gradient with respect to every gate parameter (accumulated into grads).
double meta_loss_and_gradient(const GatingNet& gate, const MetaSet& set,
                              std::span<const std::size_t> batch, double alpha,
                              std::vector<nn::DenseLayer>& grads);

struct GateConfig {
  std::vector<std::size_t> hidden_sizes{128, 64};
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double alpha = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Called after every epoch with the 1-based epoch number and mean loss.
using GateEpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains the gate on `set` with momentum SGD. Targets and base predictions
/// are rescaled by the target's mean and standard deviation before training,
/// so alpha is relative to a unit-variance squared-error term. Hidden layers
/// are He-initialized and the output layer starts at zero (uniform gate).
GatingNet fit_gate(const MetaSet& set, const GateConfig& config,
                   const GateEpochCallback& on_epoch = {});

}  // namespace dml::meta
