#include "dml/metalearner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dml/error.hpp"

namespace dml::meta {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidInput(std::string("meta-features: non-finite ") + what);
}

}  // namespace

Vector build_meta_features(std::span<const double> x, double c_xgb, double c_nn,
                           std::span<const double> importance, double y_xgb, double y_nn) {
  if (importance.size() != x.size())
    throw InvalidInput("meta-features: importance has " + std::to_string(importance.size()) +
                       " entries for " + std::to_string(x.size()) + " features");
  if (c_xgb < 0.0 || c_nn < 0.0) throw InvalidInput("meta-features: negative confidence");
  const MetaLayout layout{x.size()};
  Vector z;
  z.reserve(layout.size());
  for (double v : x) {
    require_finite(v, "feature");
    z.push_back(v);
  }
  require_finite(c_xgb, "c_xgb");
  require_finite(c_nn, "c_nn");
  z.push_back(c_xgb);
  z.push_back(c_nn);
  for (double v : importance) {
    require_finite(v, "importance");
    z.push_back(v);
  }
  require_finite(y_xgb, "y_xgb");
  require_finite(y_nn, "y_nn");
  z.push_back(y_xgb);
  z.push_back(y_nn);
  return z;
}

std::size_t GateProbabilities::argmax() const noexcept {
  std::size_t best = 0;
  for (std::size_t c = 1; c < 3; ++c)
    if ((*this)[c] > (*this)[best]) best = c;
  return best;
}

GateProbabilities to_probabilities(std::span<const double> logits) {
  if (logits.size() != 3) throw InvalidInput("gate: expected 3 logits");
  const Vector p = numkit::softmax(logits);
  return {p[0], p[1], p[2]};
}

GateProbabilities gate_forward(const GatingNet& gate, std::span<const double> z) {
  if (gate.net.output_dim() != 3) throw InvalidInput("gate: network must have 3 outputs");
  return to_probabilities(gate.net.forward(z));
}

std::pair<double, double> gating_weights(const GateProbabilities& p) {
  return {p.p_xgb + 0.5 * p.p_hybrid, p.p_nn + 0.5 * p.p_hybrid};
}

double combine(const GateProbabilities& p, double y_xgb, double y_nn) {
  return p.p_xgb * y_xgb + p.p_nn * y_nn + p.p_hybrid * 0.5 * (y_xgb + y_nn);
}

double kl_from_uniform(const GateProbabilities& p) {
  double kl = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    if (p[c] > 0.0) kl += p[c] * std::log(3.0 * p[c]);
  return kl;
}

double meta_loss(std::span<const GateProbabilities> p, std::span<const double> y_xgb,
                 std::span<const double> y_nn, std::span<const double> y, double alpha) {
  if (alpha < 0.0) throw InvalidInput("meta_loss: alpha must be >= 0");
  const std::size_t n = p.size();
  if (n == 0 || y_xgb.size() != n || y_nn.size() != n || y.size() != n)
    throw InvalidInput("meta_loss: batch lengths must match and be nonzero");
  double data = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = combine(p[i], y_xgb[i], y_nn[i]) - y[i];
    data += err * err;
    kl += kl_from_uniform(p[i]);
  }
  return (data + alpha * kl) / static_cast<double>(n);
}

void MetaSet::validate() const {
  const std::size_t n = z.rows();
  if (n == 0) throw InvalidInput("meta set is empty");
  if (y_xgb.size() != n || y_nn.size() != n || y.size() != n)
    throw InvalidInput("meta set columns have inconsistent lengths");
}

double meta_loss_and_gradient(const GatingNet& gate, const MetaSet& set,
                              std::span<const std::size_t> batch, double alpha,
                              std::vector<nn::DenseLayer>& grads) {
  if (batch.empty()) throw InvalidInput("meta_loss_and_gradient: empty batch");
  if (alpha < 0.0) throw InvalidInput("meta_loss: alpha must be >= 0");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  nn::ForwardTape tape;
  double loss = 0.0;
  double logit_grad[3];
  for (std::size_t i : batch) {
    const Vector logits = gate.net.forward(set.z.row(i), tape);
    const GateProbabilities p = to_probabilities(logits);
    const double yx = set.y_xgb[i];
    const double yn = set.y_nn[i];
    const double values[3] = {yx, yn, 0.5 * (yx + yn)};
    const double err = combine(p, yx, yn) - set.y[i];
    loss += (err * err + alpha * kl_from_uniform(p)) * inv_n;

    // dL/dp_c, then through the softmax Jacobian: dL/dl_k = p_k (g_k - sum_c p_c g_c).
    double g[3];
    double weighted = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double kl_term = p[c] > 0.0 ? std::log(3.0 * p[c]) + 1.0 : 0.0;
      g[c] = 2.0 * err * values[c] + alpha * kl_term;
      weighted += p[c] * g[c];
    }
    for (std::size_t k = 0; k < 3; ++k) logit_grad[k] = p[k] * (g[k] - weighted) * inv_n;
    gate.net.backward(tape, std::span<const double>(logit_grad, 3), &grads);
  }
  return loss;
}

void GateConfig::validate() const {
  for (std::size_t h : hidden_sizes)
    if (h == 0) throw InvalidInput("gate: hidden sizes must be positive");
  if (batch_size == 0) throw InvalidInput("gate: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("gate: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("gate: momentum must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw InvalidInput("gate: alpha must be >= 0");
}

GatingNet fit_gate(const MetaSet& set, const GateConfig& config,
                   const GateEpochCallback& on_epoch) {
  config.validate();
  set.validate();

  MetaSet scaled = set;
  const auto [y_mean, y_scale] = numkit::mean_and_scale(set.y);
  for (std::size_t i = 0; i < set.size(); ++i) {
    scaled.y[i] = (set.y[i] - y_mean) / y_scale;
    scaled.y_xgb[i] = (set.y_xgb[i] - y_mean) / y_scale;
    scaled.y_nn[i] = (set.y_nn[i] - y_mean) / y_scale;
  }

  GatingNet gate{nn::Network::he_normal(set.z.cols(), config.hidden_sizes, 3,
                                        numkit::mix_seed(config.seed, 1))};
  auto& out_layer = gate.net.layers().back();
  std::fill(out_layer.weights.data().begin(), out_layer.weights.data().end(), 0.0);

  numkit::Rng rng(numkit::mix_seed(config.seed, 2));
  nn::MomentumSgd optimizer{config.learning_rate, config.momentum, {}};
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = gate.net.zero_like();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (auto& g : grads) {
        std::fill(g.weights.data().begin(), g.weights.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      epoch_loss += meta_loss_and_gradient(gate, scaled, batch, config.alpha, grads) *
                    static_cast<double>(batch.size());
      optimizer.step(gate.net, grads);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw DivergedTraining("gate", epoch);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return gate;
}

}  // namespace dml::meta
