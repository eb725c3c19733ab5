#include "dml/neuralnet.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dml/error.hpp"

namespace dml::nn {

namespace {

std::vector<std::size_t> widths(std::size_t input_dim, std::span<const std::size_t> hidden,
                                std::size_t output_dim) {
  std::vector<std::size_t> w;
  w.push_back(input_dim);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output_dim);
  for (std::size_t v : w)
    if (v == 0) throw InvalidInput("network layer widths must be positive");
  return w;
}

void check_input(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw InvalidInput("network expects " + std::to_string(net.input_dim()) + " inputs, got " +
                       std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidInput("network input is not finite");
}

}  // namespace

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].outputs())
      throw InvalidInput("layer " + std::to_string(l) + ": bias length mismatch");
    if (l > 0 && layers_[l].inputs() != layers_[l - 1].outputs())
      throw InvalidInput("layer " + std::to_string(l) + ": input width does not chain");
  }
}

Network Network::zeros(std::size_t input_dim, std::span<const std::size_t> hidden,
                       std::size_t output_dim) {
  const auto w = widths(input_dim, hidden, output_dim);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < w.size(); ++l)
    layers.push_back({Matrix(w[l + 1], w[l]), Vector(w[l + 1], 0.0)});
  return Network(std::move(layers));
}

Network Network::he_normal(std::size_t input_dim, std::span<const std::size_t> hidden,
                           std::size_t output_dim, std::uint64_t seed) {
  Network net = zeros(input_dim, hidden, output_dim);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    const double sd = std::sqrt(2.0 / static_cast<double>(layer.inputs()));
    for (double& w : layer.weights.data()) w = sd * rng.normal();
  }
  return net;
}

std::size_t Network::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().inputs();
}

std::size_t Network::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().outputs();
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.data().size() + layer.bias.size();
  return n;
}

Vector Network::forward(std::span<const double> x) const {
  check_input(*this, x);
  Vector in(x.begin(), x.end());
  Vector out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    out.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t j = 0; j < layer.outputs(); ++j) {
      const auto w = layer.weights.row(j);
      double acc = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) acc += w[i] * in[i];
      out[j] += acc;
    }
    if (l + 1 < layers_.size())
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    in.swap(out);
  }
  return in;
}

Vector Network::forward(std::span<const double> x, ForwardTape& tape, double dropout_rate,
                        Rng* rng) const {
  check_input(*this, x);
  const bool masked = dropout_rate > 0.0 && rng != nullptr;
  const double keep_scale = masked ? 1.0 / (1.0 - dropout_rate) : 1.0;
  const std::size_t n_layers = layers_.size();
  tape.inputs.resize(n_layers);
  tape.pre.resize(n_layers);
  tape.mask_scale.resize(n_layers > 0 ? n_layers - 1 : 0);

  tape.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = layers_[l];
    const Vector& in = tape.inputs[l];
    Vector& pre = tape.pre[l];
    pre.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t j = 0; j < layer.outputs(); ++j) {
      const auto w = layer.weights.row(j);
      double acc = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) acc += w[i] * in[i];
      pre[j] += acc;
    }
    if (l + 1 == n_layers) break;

    Vector& next = tape.inputs[l + 1];
    next.resize(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) next[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    Vector& mask = tape.mask_scale[l];
    if (masked) {
      mask.resize(pre.size());
      for (std::size_t j = 0; j < pre.size(); ++j) {
        mask[j] = rng->uniform() < dropout_rate ? 0.0 : keep_scale;
        next[j] *= mask[j];
      }
    } else {
      mask.clear();
    }
  }
  return tape.pre.back();
}

Vector Network::backward(const ForwardTape& tape, std::span<const double> output_grad,
                         std::vector<DenseLayer>* param_grads) const {
  if (output_grad.size() != output_dim())
    throw InvalidInput("backward: output gradient has wrong length");
  Vector delta(output_grad.begin(), output_grad.end());
  Vector grad_in;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const Vector& in = tape.inputs[l];
    if (param_grads != nullptr) {
      auto& g = (*param_grads)[l];
      for (std::size_t j = 0; j < layer.outputs(); ++j) {
        const double d = delta[j];
        if (d == 0.0) continue;
        g.bias[j] += d;
        auto gw = g.weights.row(j);
        for (std::size_t i = 0; i < in.size(); ++i) gw[i] += d * in[i];
      }
    }
    grad_in.assign(layer.inputs(), 0.0);
    for (std::size_t j = 0; j < layer.outputs(); ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      const auto w = layer.weights.row(j);
      for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += w[i] * d;
    }
    if (l == 0) break;
    // Undo dropout mask and ReLU of the previous layer's activation.
    const Vector& prev_pre = tape.pre[l - 1];
    const Vector& mask = tape.mask_scale[l - 1];
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
      double g = prev_pre[i] > 0.0 ? grad_in[i] : 0.0;
      if (!mask.empty()) g *= mask[i];
      grad_in[i] = g;
    }
    delta.swap(grad_in);
  }
  return grad_in;
}

std::vector<DenseLayer> Network::zero_like() const {
  std::vector<DenseLayer> out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_)
    out.push_back({Matrix(layer.outputs(), layer.inputs()), Vector(layer.outputs(), 0.0)});
  return out;
}

void MomentumSgd::step(Network& net, const std::vector<DenseLayer>& grads) {
  auto& layers = net.layers();
  if (velocity.size() != layers.size()) velocity = net.zero_like();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weights.data();
    auto& vw = velocity[l].weights.data();
    const auto& gw = grads[l].weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      vw[i] = momentum * vw[i] - learning_rate * gw[i];
      w[i] += vw[i];
    }
    auto& b = layers[l].bias;
    auto& vb = velocity[l].bias;
    const auto& gb = grads[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = momentum * vb[i] - learning_rate * gb[i];
      b[i] += vb[i];
    }
  }
}

// ---------------------------------------------------------------------------

void MlpConfig::validate() const {
  for (std::size_t h : hidden_sizes)
    if (h == 0) throw InvalidInput("mlp: hidden sizes must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw InvalidInput("mlp: dropout_rate must lie in [0, 1)");
  if (batch_size == 0) throw InvalidInput("mlp: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("mlp: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("mlp: momentum must lie in [0, 1)");
}

MlpModel fit_mlp(const numkit::Dataset& train, const MlpConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  train.validate();

  MlpModel model;
  model.dropout_rate = config.dropout_rate;
  model.net = Network::he_normal(train.dim(), config.hidden_sizes, 1,
                                 numkit::mix_seed(config.seed, 1));
  std::tie(model.target_mean, model.target_scale) = numkit::mean_and_scale(train.targets);

  const std::size_t n = train.size();
  Vector target(n);
  for (std::size_t i = 0; i < n; ++i)
    target[i] = (train.targets[i] - model.target_mean) / model.target_scale;

  Rng rng(numkit::mix_seed(config.seed, 2));
  MomentumSgd optimizer{config.learning_rate, config.momentum, {}};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = model.net.zero_like();
  ForwardTape tape;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grads) {
        std::fill(g.weights.data().begin(), g.weights.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const double out =
            model.net.forward(train.features.row(i), tape, config.dropout_rate, &rng)[0];
        const double err = out - target[i];
        epoch_loss += err * err;
        const double upstream = 2.0 * err * inv_batch;
        model.net.backward(tape, std::span<const double>(&upstream, 1), &grads);
      }
      optimizer.step(model.net, grads);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw DivergedTraining("mlp", epoch);
    if (on_epoch) on_epoch(epoch, epoch_loss, model);
  }
  return model;
}

double mlp_forward(const MlpModel& model, std::span<const double> x) {
  return model.target_mean + model.target_scale * model.net.forward(x)[0];
}

double mlp_sample(const MlpModel& model, std::span<const double> x, Rng& rng) {
  ForwardTape tape;
  const double out = model.net.forward(x, tape, model.dropout_rate, &rng)[0];
  return model.target_mean + model.target_scale * out;
}

McPrediction mc_predict(const MlpModel& model, std::span<const double> x, std::size_t passes,
                        std::uint64_t seed) {
  if (passes == 0) throw InvalidInput("mc_predict: need at least one pass");
  McPrediction mc;
  mc.samples.resize(passes);
  ForwardTape tape;
  for (std::size_t t = 0; t < passes; ++t) {
    Rng rng(numkit::mix_seed(seed, t));
    const double out = model.net.forward(x, tape, model.dropout_rate, &rng)[0];
    mc.samples[t] = model.target_mean + model.target_scale * out;
  }
  mc.mean = numkit::mean(mc.samples);
  mc.variance = numkit::variance(mc.samples);
  return mc;
}

Vector input_gradient(const MlpModel& model, std::span<const double> x) {
  ForwardTape tape;
  model.net.forward(x, tape);
  const double upstream = model.target_scale;
  return model.net.backward(tape, std::span<const double>(&upstream, 1), nullptr);
}

}  // namespace dml::nn
