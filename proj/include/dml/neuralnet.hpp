#pragma once

// Fully connected ReLU networks with inverted dropout on hidden activations,
// Monte Carlo predictive sampling, and exact input gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dml/numkit.hpp"

namespace dml::nn {

using numkit::Matrix;
using numkit::Rng;
using numkit::Vector;

struct DenseLayer {
  Matrix weights;  ///< out x in
  Vector bias;     ///< out

  std::size_t inputs() const noexcept { return weights.cols(); }
  std::size_t outputs() const noexcept { return weights.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Per-pass intermediate values needed for backpropagation.
struct ForwardTape {
  std::vector<Vector> inputs;      ///< input seen by each layer (after dropout)
  std::vector<Vector> pre;         ///< pre-activation of each layer
  std::vector<Vector> mask_scale;  ///< per hidden layer: 0 or 1/(1-rate); empty without dropout
};

/// Stack of affine layers; ReLU (then optional dropout) after every layer but
/// the last, which is linear. Dropout never touches the input.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  /// Zero-initialized network with the given layer widths.
  static Network zeros(std::size_t input_dim, std::span<const std::size_t> hidden,
                       std::size_t output_dim);
  /// He initialization: weights ~ N(0, 2 / fan_in), biases 0.
  static Network he_normal(std::size_t input_dim, std::span<const std::size_t> hidden,
                           std::size_t output_dim, std::uint64_t seed);

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t parameter_count() const noexcept;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  /// Deterministic pass (no dropout, no rescaling).
  Vector forward(std::span<const double> x) const;

  /// Pass recording a tape. With dropout_rate > 0 and an rng, hidden
  /// activations are masked with inverted dropout.
  Vector forward(std::span<const double> x, ForwardTape& tape, double dropout_rate = 0.0,
                 Rng* rng = nullptr) const;

  /// Backpropagates `output_grad` through the taped pass. Parameter gradients
  /// are accumulated into `param_grads` (if non-null); returns d/dx.
  Vector backward(const ForwardTape& tape, std::span<const double> output_grad,
                  std::vector<DenseLayer>* param_grads) const;

  /// Zero-filled gradient buffers shaped like this network's layers.
  std::vector<DenseLayer> zero_like() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Mini-batch gradient descent with classical momentum, the optimizer used
/// for both the base network and the gating network.
struct MomentumSgd {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::vector<DenseLayer> velocity;

  /// params <- params + v, v <- momentum * v - learning_rate * grads.
  void step(Network& net, const std::vector<DenseLayer>& grads);
};

struct MlpConfig {
  std::vector<std::size_t> hidden_sizes{128, 64, 32};
  double dropout_rate = 0.3;
  std::size_t epochs = 150;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Regression MLP. The network is trained on standardized targets and its
/// raw output is mapped back with target_mean + target_scale * out.
struct MlpModel {
  Network net;
  double dropout_rate = 0.0;
  double target_mean = 0.0;
  double target_scale = 1.0;

  std::size_t input_dim() const noexcept { return net.input_dim(); }
  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct McPrediction {
  Vector samples;
  double mean = 0.0;
  double variance = 0.0;
};

/// Called after every epoch with the 1-based epoch number and the mean
/// mini-batch loss (standardized target units).
using EpochCallback = std::function<void(std::size_t epoch, double loss, const MlpModel&)>;

MlpModel fit_mlp(const numkit::Dataset& train, const MlpConfig& config,
                 const EpochCallback& on_epoch = {});

/// Deterministic prediction (dropout disabled).
double mlp_forward(const MlpModel& model, std::span<const double> x);

/// One stochastic pass with dropout masks drawn from `rng`.
double mlp_sample(const MlpModel& model, std::span<const double> x, Rng& rng);

/// T stochastic passes; pass t draws its masks from mix_seed(seed, t).
McPrediction mc_predict(const MlpModel& model, std::span<const double> x, std::size_t passes,
                        std::uint64_t seed);

inline double confidence_nn(const McPrediction& mc) { return mc.variance; }

/// Gradient of mlp_forward with respect to x (ReLU'(0) = 0).
Vector input_gradient(const MlpModel& model, std::span<const double> x);

}  // namespace dml::nn
