#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dml/error.hpp"
#include "dml/metalearner.hpp"
#include "oracles.hpp"

using namespace dml;
using namespace dml::meta;
using dml::numkit::Rng;

namespace {

double mean_weight(const GatingNet& gate, const MetaSet& set, bool xgb) {
  double s = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto [wx, wn] = gating_weights(gate_forward(gate, set.z.row(i)));
    s += xgb ? wx : wn;
  }
  return s / static_cast<double>(set.size());
}

// Loss through the public forward path, for finite differences.
double loss_of(const GatingNet& gate, const MetaSet& set, std::span<const std::size_t> batch, double alpha) {
  std::vector<GateProbabilities> p;
  std::vector<double> yx, yn, y;
  for (std::size_t i : batch) {
    p.push_back(gate_forward(gate, set.z.row(i)));
    yx.push_back(set.y_xgb[i]);
    yn.push_back(set.y_nn[i]);
    y.push_back(set.y[i]);
  }
  return meta_loss(p, yx, yn, y, alpha);
}

std::vector<double*> parameters(GatingNet& gate) {
  std::vector<double*> out;
  for (auto& layer : gate.net.layers()) {
    for (auto& w : layer.weights.data()) out.push_back(&w);
    for (auto& b : layer.bias) out.push_back(&b);
  }
  return out;
}

std::vector<double> flatten(const std::vector<nn::DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& layer : layers) {
    out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

}  // namespace

TEST_CASE("meta-feature layout") {
  const std::vector<double> x(8, 0.0), imp(8, 0.0);
  const auto z = build_meta_features(x, 0, 0, imp, 0, 0);
  CHECK(z.size() == 20);
  for (double v : z) CHECK(v == 0.0);

  const std::vector<double> xa{1, 2, 3}, ia{0.2, 0.3, 0.5};
  const auto a = build_meta_features(xa, 0.1, 0.2, ia, 7, 8);
  CHECK(a == std::vector<double>{1, 2, 3, 0.1, 0.2, 0.2, 0.3, 0.5, 7, 8});
  const MetaLayout layout{3};
  CHECK(a[layout.c_xgb()] == 0.1);
  CHECK(a[layout.c_nn()] == 0.2);
  CHECK(a[layout.importance_begin()] == 0.2);
  CHECK(a[layout.y_xgb()] == 7);
  CHECK(a[layout.y_nn()] == 8);
}

TEST_CASE("swapping two features swaps only their x and importance entries") {
  const std::vector<double> x{1, 2, 3}, imp{0.2, 0.3, 0.5};
  const std::vector<double> xs{3, 2, 1}, is{0.5, 0.3, 0.2};
  const auto a = build_meta_features(x, 0.1, 0.4, imp, 7, 8);
  const auto b = build_meta_features(xs, 0.1, 0.4, is, 7, 8);
  auto expected = a;
  std::swap(expected[0], expected[2]);
  std::swap(expected[5], expected[7]);
  CHECK(b == expected);
}

TEST_CASE("meta-features reject non-finite values") {
  const std::vector<double> x{1, NAN}, imp{0.5, 0.5};
  CHECK_THROWS_AS(build_meta_features(x, 0, 0, imp, 0, 0), InvalidInput);
  const std::vector<double> ok{1, 2};
  CHECK_THROWS_AS(build_meta_features(ok, INFINITY, 0, imp, 0, 0), InvalidInput);
  CHECK_THROWS_AS(build_meta_features(ok, 0, 0, imp, NAN, 0), InvalidInput);
  CHECK_THROWS_AS(build_meta_features(ok, 0, 0, std::vector<double>{1}, 0, 0), InvalidInput);
}

TEST_CASE("gate forward") {
  SUBCASE("zero network is uniform") {
    GatingNet gate{nn::Network::zeros(6, std::vector<std::size_t>{4}, 3)};
    const auto p = gate_forward(gate, std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(p.p_xgb == doctest::Approx(1.0 / 3));
    CHECK(p.p_nn == doctest::Approx(1.0 / 3));
    CHECK(p.p_hybrid == doctest::Approx(1.0 / 3));
  }
  SUBCASE("huge logit saturates without overflow") {
    GatingNet gate{nn::Network::zeros(1, {}, 3)};
    gate.net.layers()[0].bias = {1000, 0, 0};
    const auto p = gate_forward(gate, std::vector<double>{0.0});
    CHECK(p.p_xgb == doctest::Approx(1.0));
    CHECK(std::isfinite(p.p_nn));
    CHECK(p.argmax() == 0);
  }
  SUBCASE("dimension mismatch") {
    GatingNet gate{nn::Network::zeros(2, {}, 3)};
    CHECK_THROWS_AS(gate_forward(gate, std::vector<double>{1, 2, 3}), InvalidInput);
  }
}

TEST_CASE("gating weights") {
  auto w = gating_weights({1, 0, 0});
  CHECK(w.first == 1.0);
  CHECK(w.second == 0.0);
  w = gating_weights({0, 0, 1});
  CHECK(w.first == 0.5);
  CHECK(w.second == 0.5);
  w = gating_weights({0.485, 0.335, 0.180});
  CHECK(w.first == doctest::Approx(0.575));
  CHECK(w.second == doctest::Approx(0.425));
}

TEST_CASE("argmax prefers the lowest index on ties") {
  CHECK(GateProbabilities{}.argmax() == 0);
  CHECK(GateProbabilities{0.25, 0.375, 0.375}.argmax() == 1);
  CHECK(GateProbabilities{0.2, 0.3, 0.5}.argmax() == 2);
}

TEST_CASE("meta loss terms") {
  const std::vector<GateProbabilities> uniform(4);
  const std::vector<double> y{1, 2, 3, 4}, yx{1.5, 2, 2, 5}, yn{0, 2, 4, 3};
  SUBCASE("uniform gate has no KL contribution") {
    CHECK(meta_loss(uniform, yx, yn, y, 10.0) == doctest::Approx(meta_loss(uniform, yx, yn, y, 0.0)));
    CHECK(kl_from_uniform(GateProbabilities{}) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("point mass costs ln 3") {
    const std::vector<GateProbabilities> point(4, GateProbabilities{1, 0, 0});
    CHECK(kl_from_uniform(point[0]) == doctest::Approx(std::log(3.0)));
    CHECK(meta_loss(point, y, y, y, 2.0) == doctest::Approx(2.0 * std::log(3.0)));
  }
  SUBCASE("perfect base predictions have no data term") {
    Rng rng(50);
    std::vector<GateProbabilities> p;
    for (int i = 0; i < 4; ++i) {
      const auto v = numkit::softmax(oracle::random_vector(3, rng, 3.0));
      p.push_back({v[0], v[1], v[2]});
    }
    CHECK(meta_loss(p, y, y, y, 0.0) <= 1e-24);
  }
  SUBCASE("negative alpha") { CHECK_THROWS_AS(meta_loss(uniform, yx, yn, y, -1.0), InvalidInput); }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(meta_loss(uniform, yx, yn, std::vector<double>{1}, 0.0), InvalidInput);
  }
}

TEST_CASE("KL is nonnegative and vanishes only at uniform") {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    const auto v = numkit::softmax(oracle::random_vector(3, rng, 2.0));
    const GateProbabilities p{v[0], v[1], v[2]};
    const double kl = kl_from_uniform(p);
    CHECK(kl >= -1e-15);
    const double dist = std::abs(v[0] - 1.0 / 3) + std::abs(v[1] - 1.0 / 3) + std::abs(v[2] - 1.0 / 3);
    if (dist > 1e-3) CHECK(kl > 0.0);
  }
}

TEST_CASE("meta loss gradient matches finite differences") {
  Rng rng(52);
  int checked = 0, passed = 0;
  while (checked < 100) {
    const std::size_t dim = 2 + rng.below(6);
    GatingNet gate{oracle::random_network(dim, {3 + rng.below(6), 2 + rng.below(5)}, 3, rng)};
    MetaSet set;
    const std::size_t n = 1 + rng.below(6);
    set.z = numkit::Matrix(n, dim);
    for (auto& v : set.z.data()) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      set.y.push_back(rng.normal());
      set.y_xgb.push_back(rng.normal());
      set.y_nn.push_back(rng.normal());
    }
    bool near_kink = false;
    for (std::size_t i = 0; i < n; ++i) near_kink = near_kink || oracle::kink_distance(gate.net, set.z.row(i)) < 1e-3;
    if (near_kink) continue;
    ++checked;

    const double alpha = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.01, 2.0);
    std::vector<std::size_t> batch(n);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    auto grads = gate.net.zero_like();
    const double loss = meta_loss_and_gradient(gate, set, batch, alpha, grads);
    CHECK(loss == doctest::Approx(loss_of(gate, set, batch, alpha)).epsilon(1e-12));

    const auto analytic = flatten(grads);
    std::vector<double> numeric;
    const double h = 1e-4;
    for (double* w : parameters(gate)) {
      const double keep = *w;
      *w = keep + h;
      const double up = loss_of(gate, set, batch, alpha);
      *w = keep - h;
      const double down = loss_of(gate, set, batch, alpha);
      *w = keep;
      numeric.push_back((up - down) / (2 * h));
    }
    passed += oracle::relative_error(analytic, numeric) < 1e-3;
  }
  CHECK(passed >= 95);
}

TEST_CASE("gate learns the exact base model without regularization") {
  GateConfig cfg;
  cfg.alpha = 0.0;
  cfg.seed = 3;
  const auto xgb_set = oracle::one_model_exact(1000, 12, true, 61);
  CHECK(mean_weight(fit_gate(xgb_set, cfg), xgb_set, true) > 0.9);
  const auto nn_set = oracle::one_model_exact(1000, 12, false, 62);
  CHECK(mean_weight(fit_gate(nn_set, cfg), nn_set, false) > 0.9);
}

TEST_CASE("heavy regularization keeps the gate near uniform") {
  GateConfig cfg;
  cfg.alpha = 100.0;
  cfg.seed = 4;
  const auto set = oracle::one_model_exact(1000, 12, true, 63);
  const auto gate = fit_gate(set, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto p = gate_forward(gate, set.z.row(i));
    for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, std::abs(p[c] - 1.0 / 3));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("untrained gate is uniform and training is deterministic") {
  const auto set = oracle::one_model_exact(200, 5, true, 64);
  GateConfig cfg;
  cfg.epochs = 0;
  const auto untrained = fit_gate(set, cfg);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto p = gate_forward(untrained, set.z.row(i));
    CHECK(p.p_xgb == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  cfg.epochs = 5;
  CHECK(fit_gate(set, cfg) == fit_gate(set, cfg));
}

TEST_CASE("probability and weight invariants on random gates") {
  Rng rng(65);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t dim = 1 + rng.below(8);
    GatingNet gate{oracle::random_network(dim, {1 + rng.below(8)}, 3, rng)};
    const auto z = oracle::random_vector(dim, rng, 3.0);
    const auto p = gate_forward(gate, z);
    CHECK(std::abs(p.p_xgb + p.p_nn + p.p_hybrid - 1.0) <= 1e-9);
    const auto [wx, wn] = gating_weights(p);
    CHECK(std::abs(wx + wn - 1.0) <= 1e-9);
    const double yx = 5 * rng.normal(), yn = 5 * rng.normal();
    const double y = combine(p, yx, yn);
    CHECK(y >= std::min(yx, yn) - 1e-12);
    CHECK(y <= std::max(yx, yn) + 1e-12);
    CHECK(y == doctest::Approx(wx * yx + wn * yn).epsilon(1e-12));
  }
}
