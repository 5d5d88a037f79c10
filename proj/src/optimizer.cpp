#include "dlrs/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dlrs/error.hpp"

namespace dlrs::optim {

namespace {

void check_step(std::span<const double> params, std::span<const double> grads, double alpha) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("parameter and gradient lengths differ (" +
                                std::to_string(params.size()) + " vs " +
                                std::to_string(grads.size()) + ")");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("learning rate must be finite and positive");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteError("gradient[" + std::to_string(i) + "] is not finite");
    }
  }
}

}  // namespace

void sgd_step(std::span<double> params, std::span<const double> grads, double alpha) {
  check_step(params, grads, alpha);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= alpha * grads[i];
}

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon", "must be positive");
}

AdamState::AdamState(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {
  cfg_.validate();
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double alpha) {
  check_step(params, grads, alpha);
  if (params.size() != state.m_.size()) {
    throw std::invalid_argument("Adam state was sized for a different parameter vector");
  }
  const auto& c = state.cfg_;
  ++state.t_;
  const double t = static_cast<double>(state.t_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m_[i] = c.beta1 * state.m_[i] + (1.0 - c.beta1) * g;
    state.v_[i] = c.beta2 * state.v_[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m_[i] / correction1;
    const double v_hat = state.v_[i] / correction2;
    params[i] -= alpha * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

std::string_view optimizer_name(const OptimizerConfig& cfg) noexcept {
  return std::holds_alternative<AdamConfig>(cfg) ? "adam" : "sgd";
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t parameter_count) {
  if (const auto* adam = std::get_if<AdamConfig>(&cfg)) {
    state_ = AdamState(parameter_count, *adam);
  } else {
    state_ = SgdConfig{};
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads, double alpha) {
  if (auto* adam = std::get_if<AdamState>(&state_)) {
    adam_step(params, grads, *adam, alpha);
  } else {
    sgd_step(params, grads, alpha);
  }
}

}  // namespace dlrs::optim
