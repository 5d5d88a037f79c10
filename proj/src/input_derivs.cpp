#include "dlrs/input_derivs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dlrs/error.hpp"

namespace dlrs::ad {

InputDerivs eval_with_input_derivs(const nn::Net& net, double x) {
  if (!std::isfinite(x)) throw NonFiniteError("input x is not finite");
  if (net.input_dim() != 1 || net.output_dim() != 1) {
    throw std::invalid_argument("input derivatives need a scalar-in, scalar-out net");
  }
  std::vector<Dual2<double>> in{Dual2<double>{x, 1.0, 0.0}};
  const auto out = nn::forward_generic<double, Dual2<double>>(net.spec(), net.parameters(), in);
  const auto& y = out.front();
  if (!std::isfinite(y.value) || !std::isfinite(y.d1) || !std::isfinite(y.d2)) {
    throw NonFiniteError("non-finite network derivative at x = " + std::to_string(x));
  }
  return {y.value, y.d1, y.d2};
}

namespace {

void check_batch(std::span<const double> xs, std::span<const ResidualCoefficients> coeffs) {
  if (xs.empty()) throw std::invalid_argument("residual loss needs at least one point");
  if (xs.size() != coeffs.size()) {
    throw std::invalid_argument("one set of residual coefficients is needed per point");
  }
}

}  // namespace

LossAndGrad grad_through_input_derivs(const nn::Net& net, std::span<const double> xs,
                                      std::span<const ResidualCoefficients> coeffs) {
  check_batch(xs, coeffs);
  const auto n = static_cast<Eigen::Index>(xs.size());

  nn::InputDerivativePass pass;
  pass.forward(net, xs);

  Eigen::RowVectorXd adj0(n), adj1(n), adj2(n);
  double sum_sq = 0.0;
  const double scale = 2.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = coeffs[i];
    const double r = c.c_value * pass.value()(i) + c.c_d1 * pass.d1()(i) +
                     c.c_d2 * pass.d2()(i) + c.offset;
    if (!std::isfinite(r)) {
      throw NonFiniteError("non-finite residual at x = " + std::to_string(xs[i]));
    }
    sum_sq += r * r;
    adj0(i) = scale * r * c.c_value;
    adj1(i) = scale * r * c.c_d1;
    adj2(i) = scale * r * c.c_d2;
  }

  LossAndGrad out;
  out.loss = sum_sq / static_cast<double>(n);
  out.grad.assign(net.parameter_count(), 0.0);
  pass.backward(net, adj0, adj1, adj2, out.grad);
  return out;
}

LossAndGrad grad_through_input_derivs_tape(const nn::Net& net, std::span<const double> xs,
                                           std::span<const ResidualCoefficients> coeffs) {
  check_batch(xs, coeffs);
  Tape tape;
  std::vector<Var> params;
  params.reserve(net.parameter_count());
  for (double p : net.parameters()) params.push_back(tape.variable(p));

  const Var zero = tape.constant(0.0);
  const Var one = tape.constant(1.0);
  Var total = zero;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<Dual2<Var>> in{Dual2<Var>{tape.constant(xs[i]), one, zero}};
    const auto out = nn::forward_generic<Var, Dual2<Var>>(net.spec(), std::span<const Var>(params), in);
    const auto& y = out.front();
    const auto& c = coeffs[i];
    const Var r = c.c_value * y.value + c.c_d1 * y.d1 + c.c_d2 * y.d2 + c.offset;
    total = total + r * r;
  }
  const Var loss = total / static_cast<double>(xs.size());
  return {loss.value(), tape.gradient(loss)};
}

}  // namespace dlrs::ad
