#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace dlrs::optim {

/// theta <- theta - alpha * g. Throws std::invalid_argument for alpha <= 0 or
/// a length mismatch and NonFiniteError naming the first bad gradient index.
void sgd_step(std::span<double> params, std::span<const double> grads, double alpha);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Moment estimates for Adam. The step size is passed per call, so an
/// external scheduler can change it without touching m, v or t.
class AdamState {
 public:
  AdamState(std::size_t size, AdamConfig cfg = {});

  const AdamConfig& config() const noexcept { return cfg_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }
  std::uint64_t step_count() const noexcept { return t_; }

 private:
  friend void adam_step(std::span<double>, std::span<const double>, AdamState&, double);

  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

/// Bias-corrected Adam update with step size alpha.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double alpha);

struct SgdConfig {};
using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

std::string_view optimizer_name(const OptimizerConfig& cfg) noexcept;

/// Owns whichever update rule the config selects.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t parameter_count);

  void step(std::span<double> params, std::span<const double> grads, double alpha);

 private:
  std::variant<SgdConfig, AdamState> state_;
};

}  // namespace dlrs::optim
