#pragma once

#include <span>
#include <vector>

#include "dlrs/network.hpp"

namespace dlrs::ad {

/// psi(x), dpsi/dx and d2psi/dx2 of a scalar network output.
struct InputDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Propagates the seed (x, 1, 0) through `net` with Dual2 arithmetic.
/// Throws NonFiniteError if any output component is NaN or Inf.
InputDerivs eval_with_input_derivs(const nn::Net& net, double x);

/// A pointwise residual that is affine in the network output and its first
/// two input derivatives:
///   r(x) = c_value * psi + c_d1 * psi' + c_d2 * psi'' + offset.
/// A trial solution wrapped around the network followed by a linear ODE
/// operator always reduces to this form.
struct ResidualCoefficients {
  double c_value = 0.0;
  double c_d1 = 0.0;
  double c_d2 = 0.0;
  double offset = 0.0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean squared residual over the points and its exact parameter gradient.
/// Second-order forward propagation for the input derivatives, reverse sweep
/// for the parameters, both batched over the points.
LossAndGrad grad_through_input_derivs(const nn::Net& net, std::span<const double> xs,
                                      std::span<const ResidualCoefficients> coeffs);

/// Same quantity recorded point by point on a scalar Tape with Dual2<Var>
/// arithmetic. Slow; used to cross-check the batched route.
LossAndGrad grad_through_input_derivs_tape(const nn::Net& net, std::span<const double> xs,
                                           std::span<const ResidualCoefficients> coeffs);

}  // namespace dlrs::ad
