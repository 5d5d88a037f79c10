#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <span>
#include <vector>

#include "dlrs/input_derivs.hpp"
#include "dlrs/network.hpp"
#include "dlrs/optimizer.hpp"
#include "dlrs/scheduler.hpp"
#include "dlrs/training.hpp"

namespace dlrs::pinn {

/// psi'' + k^2 psi = 0 on [x1, x2] with psi(x1) = psi1, psi(x2) = psi2.
struct HelmholtzProblem {
  double x1 = 0.0;           // m
  double x2 = 1.0;           // m
  double psi1 = 1.0;
  double psi2 = 0.0;
  double frequency = 100.0;  // Hz
  double sound_speed = 340.0;  // m/s
  std::size_t n_points = 2000;
  std::uint64_t seed = 50;

  /// k = 2 pi f / c, rad/m.
  double wavenumber() const noexcept;
  /// Throws ConfigError; rejects resonant setups where sin(k (x2 - x1)) ~ 0.
  void validate() const;
};

/// n_points samples in [x1, x2] in ascending order; both endpoints are always
/// included and the rest are uniform draws from the sampling stream of `seed`.
std::vector<double> sample_collocation(const HelmholtzProblem& problem);

/// n evenly spaced points from x1 to x2 inclusive.
std::vector<double> uniform_grid(const HelmholtzProblem& problem, std::size_t n);

using FieldDerivs = ad::InputDerivs;

/// Boundary-satisfying wrapper around the network output:
///   psi_t = psi1 (x2 - x)/L + psi2 (x - x1)/L + ((x - x1)/L)((x2 - x)/L) psi_hat(x)
/// with L = x2 - x1, together with its first two x-derivatives.
FieldDerivs trial_solution(const HelmholtzProblem& problem, const nn::Net& net, double x);

/// Coefficients that turn (psi_hat, psi_hat', psi_hat'') at x into the
/// residual psi_t'' + k^2 psi_t.
ad::ResidualCoefficients residual_coefficients(const HelmholtzProblem& problem, double x);

/// (1/N) sum (psi'' + k^2 psi)^2 over `points` for an arbitrary field.
/// Throws NonFiniteError naming the offending x.
double residual_loss(const HelmholtzProblem& problem,
                     const std::function<FieldDerivs(double)>& field,
                     std::span<const double> points);

/// residual_loss of the trial solution built on `net`.
double residual_loss(const HelmholtzProblem& problem, const nn::Net& net,
                     std::span<const double> points);

/// Residual loss and exact parameter gradient on a batch of points.
ad::LossAndGrad residual_loss_and_grad(const HelmholtzProblem& problem, const nn::Net& net,
                                       std::span<const double> points);

/// psi(x) = [psi1 sin(k (x2 - x)) + psi2 sin(k (x - x1))] / sin(k (x2 - x1)).
/// Throws std::domain_error at resonance.
double analytic_solution(const HelmholtzProblem& problem, double x);
FieldDerivs analytic_field(const HelmholtzProblem& problem, double x);

/// 100 * ||predicted - truth||_2 / ||truth||_2.
double relative_error(std::span<const double> predicted, std::span<const double> truth);

/// How the collocation set is dealt into batches each epoch.
///   kStratified: the sorted points are cut into runs of batch_count
///     neighbours and each run deals one point to every batch in random
///     order, so every batch spans the whole domain.
///   kRandom: plain shuffle, then consecutive slices.
enum class Batching { kStratified, kRandom };

std::string_view to_string(Batching b) noexcept;
Batching parse_batching(std::string_view tag);

/// Batch index lists for one epoch over `n` ascending points.
std::vector<std::vector<std::size_t>> deal_batches(std::size_t n, std::size_t batch_count,
                                                   Batching batching, std::mt19937_64& rng);

struct PinnTrainConfig {
  nn::NetSpec net;
  optim::OptimizerConfig optimizer = optim::AdamConfig{};
  SchedulerConfig scheduler = DlrsConfig{};
  std::uint64_t epochs = 2000;
  std::size_t batch_count = 10;
  Batching batching = Batching::kStratified;
  std::size_t eval_points = 512;
  std::uint64_t seed = 50;
};

/// Samples collocation points once, then trains the trial solution with
/// shuffled mini-batches. The epoch metric is E_r on a fixed uniform grid.
TrainResult train_pinn(const HelmholtzProblem& problem, const PinnTrainConfig& config,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Field profile CSV with header `x,psi_predicted,psi_true`.
std::string field_profile_csv(const HelmholtzProblem& problem, const nn::Net& net,
                              std::size_t points);

}  // namespace dlrs::pinn
