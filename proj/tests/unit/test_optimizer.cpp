#include <doctest.h>

#include <cmath>
#include <limits>

#include "dlrs/error.hpp"
#include "dlrs/optimizer.hpp"
#include "dlrs/training.hpp"
#include "support/oracles.hpp"

using namespace dlrs;
using namespace dlrs::optim;

namespace {

// Scalar Adam written straight from the recurrences.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double alpha, double b1 = 0.9, double b2 = 0.999,
              double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - alpha * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("sgd step") {
  std::vector<double> theta{1, 2};
  const std::vector<double> g{0.5, -1};
  sgd_step(theta, g, 0.1);
  CHECK(theta[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(2.1).epsilon(1e-15));

  std::vector<double> still{3, 4};
  sgd_step(still, std::vector<double>{0, 0}, 0.5);
  CHECK(still == std::vector<double>{3, 4});

  CHECK_THROWS_AS(sgd_step(theta, g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sgd_step(theta, std::vector<double>{1}, 0.1), std::invalid_argument);
  try {
    sgd_step(theta, std::vector<double>{0, std::numeric_limits<double>::quiet_NaN()}, 0.1);
    FAIL("NaN gradient accepted");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("[1]") != std::string::npos);
  }
}

TEST_CASE("sgd is linear in alpha and gradient") {
  oracle::Gen gen(51);
  for (int i = 0; i < 100; ++i) {
    const double a = gen.uniform(0.01, 1), g = gen.uniform(-3, 3), k = gen.uniform(0.5, 2);
    std::vector<double> p1{0.0}, p2{0.0}, p3{0.0};
    sgd_step(p1, std::vector<double>{g}, a);
    sgd_step(p2, std::vector<double>{g}, k * a);
    sgd_step(p3, std::vector<double>{k * g}, a);
    CHECK(p2[0] == doctest::Approx(k * p1[0]).epsilon(1e-14));
    CHECK(p3[0] == doctest::Approx(k * p1[0]).epsilon(1e-14));
  }
}

TEST_CASE("adam first step is about alpha") {
  std::vector<double> theta{0.5};
  AdamState s(1);
  adam_step(theta, std::vector<double>{1.0}, s, 0.001);
  CHECK(theta[0] - 0.5 == doctest::Approx(-0.001).epsilon(1e-7));
  CHECK(s.step_count() == 1);
}

TEST_CASE("adam matches the scalar recurrences") {
  std::vector<double> theta{1.0};
  AdamState s(1);
  ScalarAdam ref;
  double r = 1.0;
  for (int i = 0; i < 2; ++i) {
    adam_step(theta, std::vector<double>{0.3}, s, 0.01);
    r = ref.step(r, 0.3, 0.01);
  }
  CHECK(theta[0] == r);

  oracle::Gen gen(53);
  ScalarAdam ref2;
  AdamState s2(1);
  std::vector<double> th{0.0};
  double r2 = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double g = gen.uniform(-1, 1);
    const double a = gen.log_uniform(1e-4, 1e-1);
    adam_step(th, std::vector<double>{g}, s2, a);
    r2 = ref2.step(r2, g, a);
  }
  CHECK(th[0] == doctest::Approx(r2).epsilon(1e-13));
}

TEST_CASE("adam with zero gradients") {
  std::vector<double> fresh{1.0, -2.0};
  AdamState s(2);
  for (int i = 0; i < 5; ++i) adam_step(fresh, std::vector<double>{0.0, 0.0}, s, 0.01);
  CHECK(fresh == std::vector<double>{1.0, -2.0});
  CHECK(s.first_moment()[0] == 0.0);
  CHECK(s.second_moment()[0] == 0.0);

  std::vector<double> theta{1.0, -2.0};
  AdamState d(2);
  adam_step(theta, std::vector<double>{1.0, 1.0}, d, 0.01);
  const double m0 = d.first_moment()[0];
  const double v0 = d.second_moment()[0];
  for (int i = 0; i < 10; ++i) adam_step(theta, std::vector<double>{0.0, 0.0}, d, 0.01);
  CHECK(d.first_moment()[0] == doctest::Approx(m0 * std::pow(0.9, 10)).epsilon(1e-14));
  CHECK(d.second_moment()[0] == doctest::Approx(v0 * std::pow(0.999, 10)).epsilon(1e-14));
}

TEST_CASE("adam with large epsilon is damped") {
  oracle::Gen gen(57);
  for (int i = 0; i < 100; ++i) {
    AdamConfig cfg;
    cfg.epsilon = gen.log_uniform(1.0, 1e3);
    AdamState s(1, cfg);
    std::vector<double> theta{0.0};
    const double alpha = gen.log_uniform(1e-4, 1e-1);
    for (int k = 0; k < 5; ++k) {
      const double before = theta[0];
      adam_step(theta, std::vector<double>{gen.uniform(-2, 2)}, s, alpha);
      const double m_hat = s.first_moment()[0] / (1 - std::pow(cfg.beta1, s.step_count()));
      CHECK(std::abs(theta[0] - before) <= alpha * std::abs(m_hat) / cfg.epsilon * (1 + 1e-12));
    }
  }
}

TEST_CASE("adam config validation") {
  CHECK_THROWS_AS((AdamConfig{1.0, 0.999, 1e-8}).validate(), ConfigError);
  CHECK_THROWS_AS((AdamConfig{0.9, -0.1, 1e-8}).validate(), ConfigError);
  CHECK_THROWS_AS((AdamConfig{0.9, 0.999, 0.0}).validate(), ConfigError);
  AdamState s(3);
  std::vector<double> wrong(2, 0.0);
  CHECK_THROWS_AS(adam_step(wrong, wrong, s, 0.1), std::invalid_argument);
}

TEST_CASE("scheduled alpha substitutes into Adam without touching the moments") {
  // Quadratic bowl loss on the parameters of a tiny net, 4 batches per epoch.
  nn::NetSpec spec{{1, 2, 1}, {nn::Activation::kTanh, nn::Activation::kIdentity}};
  oracle::Gen gen(59);
  auto net = oracle::random_net(gen, spec);
  const auto start = std::vector<double>(net.parameters().begin(), net.parameters().end());
  std::vector<double> centres(start.size());
  for (auto& c : centres) c = gen.uniform(-1, 1);

  const auto batch_loss = [&](std::span<const double> p, std::size_t b, std::span<double> grad) {
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double w = 1.0 + static_cast<double>((i + b) % 3);
      const double d = p[i] - centres[i];
      loss += w * d * d;
      grad[i] = 2.0 * w * d;
    }
    return loss;
  };

  TrainingHooks hooks;
  hooks.batches = [](std::uint64_t) {
    return std::vector<std::vector<std::size_t>>{{0}, {1}, {2}, {3}};
  };
  hooks.loss_and_grad = [&](const nn::Net& n, std::span<const std::size_t> batch,
                            std::span<double> grad) { return batch_loss(n.parameters(), batch[0], grad); };
  hooks.metric = [](const nn::Net&) { return 0.0; };
  const auto result = run_training(std::move(net), AdamConfig{}, DlrsConfig{0.05, 0.5, 1.0, 0.1, 1e-8, 1.0}, 6, hooks);
  REQUIRE(result.epochs.size() == 6);

  // Reference: independent scalar Adam per coordinate, alpha taken from the records.
  std::vector<double> p = start;
  std::vector<ScalarAdam> adam(p.size());
  std::vector<double> grad(p.size());
  for (const auto& e : result.epochs) {
    for (std::size_t b = 0; b < 4; ++b) {
      batch_loss(p, b, grad);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = adam[i].step(p[i], grad[i], e.record.alpha);
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(result.net.parameters()[i] == doctest::Approx(p[i]).epsilon(1e-12));
  }
  // The rate actually moved, so this is not a constant-rate comparison.
  CHECK(result.epochs.back().record.alpha != result.epochs.front().record.alpha);
}

TEST_CASE("non-finite loss stops training and keeps the last good parameters") {
  nn::NetSpec spec{{1, 1}, {nn::Activation::kIdentity}};
  auto net = nn::Net::from_parameters(spec, {0.0, 0.0});
  TrainingHooks hooks;
  hooks.batches = [](std::uint64_t) { return std::vector<std::vector<std::size_t>>{{0}, {1}}; };
  int calls = 0;
  hooks.loss_and_grad = [&](const nn::Net&, std::span<const std::size_t>, std::span<double> grad) {
    ++calls;
    grad[0] = 1.0;
    grad[1] = -1.0;
    // Second batch of epoch 3 goes bad.
    return calls == 6 ? std::numeric_limits<double>::quiet_NaN() : 1.0 + calls;
  };
  hooks.metric = [](const nn::Net&) { return 0.0; };
  const auto result = run_training(std::move(net), SgdConfig{}, ConstantConfig{0.1}, 5, hooks);
  REQUIRE(result.abort_reason);
  CHECK(result.abort_reason->rfind("epoch 3", 0) == 0);
  CHECK(result.epochs.size() == 2);
  CHECK(result.net.parameters()[0] == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(result.net.parameters()[1] == doctest::Approx(0.4).epsilon(1e-15));
}
