#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dlrs/dual2.hpp"
#include "dlrs/error.hpp"
#include "dlrs/input_derivs.hpp"
#include "dlrs/network.hpp"
#include "dlrs/tape.hpp"
#include "support/oracles.hpp"

using namespace dlrs;
using ad::Dual2;
using ad::Tape;
using ad::Var;

namespace {

// Loss used for parameter gradients of plain nets: sum_o w_o * out_o.
template <typename P>
P weighted_output(const nn::NetSpec& spec, std::span<const P> params, std::span<const double> x,
                  std::span<const double> w) {
  std::vector<P> in;
  for (double v : x) in.push_back(P(v));
  const auto out = nn::forward_generic<P, P>(spec, params, in);
  P acc = out[0] * w[0];
  for (std::size_t o = 1; o < out.size(); ++o) acc = acc + out[o] * w[o];
  return acc;
}

Var weighted_output_tape(Tape& tape, const nn::Net& net, std::span<const double> x,
                         std::span<const double> w) {
  std::vector<Var> params;
  for (double p : net.parameters()) params.push_back(tape.variable(p));
  std::vector<Var> in;
  for (double v : x) in.push_back(tape.constant(v));
  const auto out = nn::forward_generic<Var, Var>(net.spec(), std::span<const Var>(params), in);
  Var acc = out[0] * w[0];
  for (std::size_t o = 1; o < out.size(); ++o) acc = acc + out[o] * w[o];
  return acc;
}

long double residual_loss_ld(const nn::NetSpec& spec, std::span<const long double> params,
                             std::span<const double> xs,
                             std::span<const ad::ResidualCoefficients> coeffs) {
  using D = Dual2<long double>;
  long double sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto out = nn::forward_generic<long double, D>(spec, params,
                                                         std::vector<D>{D{xs[i], 1.0L, 0.0L}});
    const auto& c = coeffs[i];
    const long double r = c.c_value * out[0].value + c.c_d1 * out[0].d1 + c.c_d2 * out[0].d2 + c.offset;
    sum += r * r;
  }
  return sum / static_cast<long double>(xs.size());
}

std::vector<long double> widen(std::span<const double> p) { return {p.begin(), p.end()}; }

nn::Net scalar_net(double w, double b, nn::Activation act) {
  nn::NetSpec spec{{1, 1, 1}, {act, nn::Activation::kIdentity}};
  return nn::Net::from_parameters(spec, {w, b, 1.0, 0.0});
}

}  // namespace

TEST_CASE("tape closed forms") {
  Tape t;
  const Var w = t.variable(3.0);
  CHECK(t.gradient(w * w)[0] == 6.0);

  Tape t2;
  const Var z = t2.variable(0.0);
  CHECK(t2.gradient(sin(z))[0] == 1.0);

  Tape t3;
  const Var a = t3.variable(2.0);
  const Var unused = t3.variable(5.0);
  const auto g = t3.gradient(pow(a, 3.0) + exp(a) / a - log(a) * cos(a) + tanh(a));
  const double x = 2.0;
  const double want = 3 * x * x + std::exp(x) / x - std::exp(x) / (x * x) - std::cos(x) / x +
                      std::log(x) * std::sin(x) + 1 - std::tanh(x) * std::tanh(x);
  CHECK(g[0] == doctest::Approx(want).epsilon(1e-14));
  CHECK(g[1] == 0.0);
  CHECK(unused.value() == 5.0);
}

TEST_CASE("tape nodes are topologically ordered") {
  oracle::Gen gen(11);
  Tape t;
  const auto net = oracle::random_net(gen, oracle::random_spec(gen, 2, 2));
  const double x[] = {0.3, -0.7};
  const double w[] = {1.0, -2.0};
  weighted_output_tape(t, net, x, w);
  for (std::uint32_t i = 0; i < t.size(); ++i) {
    const auto& n = t.node(i);
    if (n.op == ad::Op::kLeaf || n.op == ad::Op::kConstant) continue;
    CHECK(n.a < i);
    if (n.op == ad::Op::kAdd || n.op == ad::Op::kSub || n.op == ad::Op::kMul || n.op == ad::Op::kDiv) {
      CHECK(n.b < i);
    }
  }
}

TEST_CASE("tape rejects foreign roots and non-finite results") {
  Tape t1, t2;
  const Var a = t1.variable(1.0);
  const Var b = t2.variable(1.0);
  CHECK_THROWS_AS(t1.gradient(b), std::invalid_argument);
  CHECK_THROWS_AS(a + b, std::invalid_argument);
  CHECK_THROWS_AS(a / t1.constant(0.0), NonFiniteError);
  CHECK_THROWS_AS(log(t1.constant(0.0)), NonFiniteError);
  CHECK_THROWS_AS(exp(t1.variable(1000.0)), NonFiniteError);
}

TEST_CASE("gradient is linear in the loss") {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = oracle::random_net(gen, oracle::random_spec(gen, 2, 1));
    const double x1[] = {gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const double x2[] = {gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const double w[] = {1.0};
    const double a = gen.uniform(-2, 2), b = gen.uniform(-2, 2);

    Tape t;
    const Var l1 = weighted_output_tape(t, net, x1, w);
    const auto g1 = t.gradient(l1);
    Tape u;
    const Var l2 = weighted_output_tape(u, net, x2, w);
    const auto g2 = u.gradient(l2);

    // Both losses on one tape sharing the parameter leaves.
    Tape both;
    std::vector<Var> params;
    for (double p : net.parameters()) params.push_back(both.variable(p));
    auto eval = [&](const double* x) {
      std::vector<Var> in{both.constant(x[0]), both.constant(x[1])};
      return nn::forward_generic<Var, Var>(net.spec(), std::span<const Var>(params), in)[0];
    };
    const auto g = both.gradient(a * eval(x1) + b * eval(x2));
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(g[i] == doctest::Approx(a * g1[i] + b * g2[i]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("tape gradients are deterministic") {
  oracle::Gen gen(9);
  const auto net = oracle::random_net(gen, oracle::random_spec(gen, 3, 2));
  const double x[] = {0.1, 0.2, 0.3};
  const double w[] = {0.5, 1.5};
  Tape t1, t2;
  const auto g1 = t1.gradient(weighted_output_tape(t1, net, x, w));
  const auto g2 = t2.gradient(weighted_output_tape(t2, net, x, w));
  CHECK(g1 == g2);
}

TEST_CASE("tape parameter gradients match finite differences") {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = oracle::random_spec(gen, 2, 2);
    const auto net = oracle::random_net(gen, spec);
    const double x[] = {gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const double w[] = {gen.uniform(-1, 1), gen.uniform(-1, 1)};
    Tape t;
    const auto grad = t.gradient(weighted_output_tape(t, net, x, w));
    auto p = widen(net.parameters());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const long double base = p[i];
      const auto f = [&](long double v) {
        p[i] = v;
        const long double out = weighted_output<long double>(spec, p, x, w);
        p[i] = base;
        return out;
      };
      const double fd = static_cast<double>(oracle::central_d1(f, base, 1e-3L));
      CHECK(oracle::rel_err(grad[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("Dual2 rules against closed forms") {
  oracle::Gen gen(13);
  for (int i = 0; i < 200; ++i) {
    const double x = gen.uniform(-2, 2);
    const Dual2<double> X{x, 1.0, 0.0};

    const auto p = X * X * X - 2.0 * X + 1.0;
    CHECK(p.d1 == doctest::Approx(3 * x * x - 2));
    CHECK(p.d2 == doctest::Approx(6 * x));

    const auto prod = X * sin(X);
    CHECK(prod.d1 == doctest::Approx(std::sin(x) + x * std::cos(x)));
    CHECK(prod.d2 == doctest::Approx(2 * std::cos(x) - x * std::sin(x)));

    const auto q = cos(X) / (1.0 + X * X);
    const double den = 1 + x * x;
    const double dq = -std::sin(x) / den - 2 * x * std::cos(x) / (den * den);
    const double d2q = -std::cos(x) / den + 4 * x * std::sin(x) / (den * den) -
                       2 * std::cos(x) * (1 - 3 * x * x) / (den * den * den);
    CHECK(q.d1 == doctest::Approx(dq).epsilon(1e-12));
    CHECK(q.d2 == doctest::Approx(d2q).epsilon(1e-12));

    const auto th = tanh(3.0 * X);
    const double t = std::tanh(3 * x);
    CHECK(th.d1 == doctest::Approx(3 * (1 - t * t)));
    CHECK(th.d2 == doctest::Approx(-18 * t * (1 - t * t)).epsilon(1e-12).scale(1.0));

    const auto e = exp(sin(X));
    CHECK(e.d2 == doctest::Approx(std::exp(std::sin(x)) *
                                  (std::cos(x) * std::cos(x) - std::sin(x))).scale(1.0));
  }
}

TEST_CASE("input derivatives of hand-built nets") {
  nn::NetSpec id{{1, 1}, {nn::Activation::kIdentity}};
  const auto ident = nn::Net::from_parameters(id, {1.0, 0.0});
  const auto d = ad::eval_with_input_derivs(ident, 0.7);
  CHECK(d.value == 0.7);
  CHECK(d.d1 == 1.0);
  CHECK(d.d2 == 0.0);

  const auto s3 = scalar_net(3.0, 0.0, nn::Activation::kSin);
  const auto at0 = ad::eval_with_input_derivs(s3, 0.0);
  CHECK(at0.value == 0.0);
  CHECK(at0.d1 == 3.0);
  CHECK(at0.d2 == 0.0);
  const auto at = ad::eval_with_input_derivs(s3, std::numbers::pi / 6);
  CHECK(at.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(at.d1) < 1e-14);
  CHECK(at.d2 == doctest::Approx(-9.0).epsilon(1e-14));
}

TEST_CASE("Dual2 input derivatives match five-point differences") {
  oracle::Gen gen(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto spec = oracle::random_spec(gen, 1, 1, false, true);
    const auto net = oracle::random_net(gen, spec);
    const auto p = widen(net.parameters());
    const double x = gen.uniform(-1, 1);
    const auto f = [&](long double v) { return oracle::forward_ld(spec, p, {v})[0]; };
    const auto d = ad::eval_with_input_derivs(net, x);
    CHECK(oracle::rel_err(d.d1, static_cast<double>(oracle::central_d1(f, x, 1e-3L))) < 1e-6);
    CHECK(oracle::rel_err(d.d2, static_cast<double>(oracle::five_point_d2(f, x, 1e-3L))) < 1e-4);
  }
}

TEST_CASE("batched input-derivative pass agrees with the scalar route") {
  oracle::Gen gen(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = oracle::random_net(gen, oracle::random_spec(gen, 1, 1));
    std::vector<double> xs(9);
    for (auto& x : xs) x = gen.uniform(-1, 1);
    nn::InputDerivativePass pass;
    pass.forward(net, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto d = ad::eval_with_input_derivs(net, xs[i]);
      const auto j = static_cast<Eigen::Index>(i);
      CHECK(pass.value()(j) == doctest::Approx(d.value).epsilon(1e-13).scale(1.0));
      CHECK(pass.d1()(j) == doctest::Approx(d.d1).epsilon(1e-13).scale(1.0));
      CHECK(pass.d2()(j) == doctest::Approx(d.d2).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("residual gradient: fused, tape and finite differences agree") {
  oracle::Gen gen(23);
  nn::NetSpec spec{{1, 8, 8, 1},
                   {nn::Activation::kSin, nn::Activation::kCos, nn::Activation::kIdentity}};
  for (int trial = 0; trial < 3; ++trial) {
    const auto net = oracle::random_net(gen, spec);
    std::vector<double> xs(16);
    std::vector<ad::ResidualCoefficients> coeffs(16);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = gen.uniform(0, 1);
      coeffs[i] = {gen.uniform(-3, 3), gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    }
    const auto fused = ad::grad_through_input_derivs(net, xs, coeffs);
    const auto taped = ad::grad_through_input_derivs_tape(net, xs, coeffs);
    auto p = widen(net.parameters());
    CHECK(fused.loss == doctest::Approx(static_cast<double>(residual_loss_ld(spec, p, xs, coeffs))).epsilon(1e-13));
    CHECK(taped.loss == doctest::Approx(fused.loss).epsilon(1e-13));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const long double base = p[i];
      const auto f = [&](long double v) {
        p[i] = v;
        const long double out = residual_loss_ld(spec, p, xs, coeffs);
        p[i] = base;
        return out;
      };
      const double fd = static_cast<double>(oracle::central_d1(f, base, 1e-3L));
      CHECK(oracle::rel_err(fused.grad[i], fd) < 1e-5);
      CHECK(oracle::rel_err(taped.grad[i], fused.grad[i]) < 1e-10);
    }
  }
}

TEST_CASE("residual gradient of a zero-weight net") {
  nn::NetSpec spec{{1, 4, 1}, {nn::Activation::kSin, nn::Activation::kIdentity}};
  const auto net = nn::Net::from_parameters(spec, std::vector<double>(spec.parameter_count(), 0.0));
  const std::vector<double> xs{0.2, 0.5, 0.9};
  const double k2 = 4.0;
  std::vector<ad::ResidualCoefficients> coeffs;
  for (double x : xs) coeffs.push_back({k2 + x, 0.3, 1.0, 0.5 - x});
  const auto lg = ad::grad_through_input_derivs(net, xs, coeffs);
  const std::size_t out_bias = spec.parameter_count() - 1;
  REQUIRE(std::isfinite(lg.grad[out_bias]));
  // d/db of mean((c_v b + off)^2) at b = 0 is mean(2 c_v off).
  double want = 0.0;
  for (const auto& c : coeffs) want += 2.0 * c.c_value * c.offset;
  want /= static_cast<double>(coeffs.size());
  CHECK(lg.grad[out_bias] == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("exact solution gives zero loss and zero gradient") {
  const double k = 2.5;
  const auto net = scalar_net(k, 0.0, nn::Activation::kSin);
  std::vector<double> xs{0.1, 0.4, 0.8, 1.3};
  std::vector<ad::ResidualCoefficients> coeffs(xs.size(), {k * k, 0.0, 1.0, 0.0});
  const auto lg = ad::grad_through_input_derivs(net, xs, coeffs);
  CHECK(lg.loss < 1e-25);
  for (double g : lg.grad) CHECK(std::abs(g) < 1e-12);
}
