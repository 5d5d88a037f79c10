#include "dlrs/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dlrs/error.hpp"

namespace dlrs::pinn {

double HelmholtzProblem::wavenumber() const noexcept {
  return 2.0 * std::numbers::pi * frequency / sound_speed;
}

void HelmholtzProblem::validate() const {
  if (!std::isfinite(x1) || !std::isfinite(x2) || !(x2 > x1)) {
    throw ConfigError("pinn.x2", "domain needs finite x1 < x2");
  }
  if (!std::isfinite(psi1)) throw ConfigError("pinn.psi1", "must be finite");
  if (!std::isfinite(psi2)) throw ConfigError("pinn.psi2", "must be finite");
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw ConfigError("pinn.frequency", "must be positive");
  }
  if (!(sound_speed > 0.0) || !std::isfinite(sound_speed)) {
    throw ConfigError("pinn.sound_speed", "must be positive");
  }
  if (n_points < 2) throw ConfigError("pinn.n_points", "need at least the two endpoints");
  if (std::abs(std::sin(wavenumber() * (x2 - x1))) <= 1e-6) {
    throw ConfigError("pinn.frequency", "resonant: sin(k (x2 - x1)) vanishes, no unique solution");
  }
}

std::vector<double> sample_collocation(const HelmholtzProblem& problem) {
  if (problem.n_points < 2) throw ConfigError("pinn.n_points", "need at least the two endpoints");
  std::vector<double> pts;
  pts.reserve(problem.n_points);
  pts.push_back(problem.x1);
  pts.push_back(problem.x2);
  std::mt19937_64 rng(derive_seed(problem.seed, RngStream::kSample));
  std::uniform_real_distribution<double> dist(problem.x1, problem.x2);
  while (pts.size() < problem.n_points) pts.push_back(dist(rng));
  std::sort(pts.begin(), pts.end());
  return pts;
}

std::vector<double> uniform_grid(const HelmholtzProblem& problem, std::size_t n) {
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> grid(n);
  const double step = (problem.x2 - problem.x1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = problem.x1 + step * static_cast<double>(i);
  grid.back() = problem.x2;
  return grid;
}

FieldDerivs trial_solution(const HelmholtzProblem& problem, const nn::Net& net, double x) {
  using D = ad::Dual2<double>;
  const double length = problem.x2 - problem.x1;
  const D xd{x, 1.0, 0.0};
  const D u = (xd - problem.x1) / length;
  const D v = (problem.x2 - xd) / length;
  const auto out = ad::eval_with_input_derivs(net, x);
  const D psi_hat{out.value, out.d1, out.d2};
  const D psi = problem.psi1 * v + problem.psi2 * u + u * v * psi_hat;
  return {psi.value, psi.d1, psi.d2};
}

ad::ResidualCoefficients residual_coefficients(const HelmholtzProblem& problem, double x) {
  const double length = problem.x2 - problem.x1;
  const double k2 = problem.wavenumber() * problem.wavenumber();
  const double u = (x - problem.x1) / length;
  const double v = (problem.x2 - x) / length;
  const double h = u * v;
  const double dh = (v - u) / length;
  const double d2h = -2.0 / (length * length);
  const double g = problem.psi1 * v + problem.psi2 * u;
  return {d2h + k2 * h, 2.0 * dh, h, k2 * g};
}

double residual_loss(const HelmholtzProblem& problem,
                     const std::function<FieldDerivs(double)>& field,
                     std::span<const double> points) {
  if (points.empty()) throw std::invalid_argument("residual loss needs at least one point");
  const double k2 = problem.wavenumber() * problem.wavenumber();
  double sum = 0.0;
  for (double x : points) {
    const auto f = field(x);
    const double r = f.d2 + k2 * f.value;
    if (!std::isfinite(r)) throw NonFiniteError("non-finite residual at x = " + std::to_string(x));
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

double residual_loss(const HelmholtzProblem& problem, const nn::Net& net,
                     std::span<const double> points) {
  return residual_loss(
      problem, [&](double x) { return trial_solution(problem, net, x); }, points);
}

ad::LossAndGrad residual_loss_and_grad(const HelmholtzProblem& problem, const nn::Net& net,
                                       std::span<const double> points) {
  std::vector<ad::ResidualCoefficients> coeffs;
  coeffs.reserve(points.size());
  for (double x : points) coeffs.push_back(residual_coefficients(problem, x));
  return ad::grad_through_input_derivs(net, points, coeffs);
}

double analytic_solution(const HelmholtzProblem& problem, double x) {
  return analytic_field(problem, x).value;
}

FieldDerivs analytic_field(const HelmholtzProblem& problem, double x) {
  const double k = problem.wavenumber();
  const double denom = std::sin(k * (problem.x2 - problem.x1));
  if (std::abs(denom) <= 1e-6) {
    throw std::domain_error("resonant wavenumber: sin(k (x2 - x1)) vanishes");
  }
  const double a = k * (problem.x2 - x);
  const double b = k * (x - problem.x1);
  const double value = (problem.psi1 * std::sin(a) + problem.psi2 * std::sin(b)) / denom;
  const double d1 = k * (-problem.psi1 * std::cos(a) + problem.psi2 * std::cos(b)) / denom;
  return {value, d1, -k * k * value};
}

double relative_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("relative error: length mismatch");
  }
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predicted[i] - truth[i];
    diff += d * d;
    norm += truth[i] * truth[i];
  }
  if (norm == 0.0) throw std::domain_error("relative error: reference field has zero norm");
  return 100.0 * std::sqrt(diff) / std::sqrt(norm);
}

namespace {

std::vector<double> trial_values(const HelmholtzProblem& problem, const nn::Net& net,
                                 std::span<const double> xs) {
  const Eigen::MatrixXd in =
      Eigen::Map<const Eigen::RowVectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::MatrixXd out = net.forward_batch(in);
  const double length = problem.x2 - problem.x1;
  std::vector<double> psi(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double u = (xs[i] - problem.x1) / length;
    const double v = (problem.x2 - xs[i]) / length;
    psi[i] = problem.psi1 * v + problem.psi2 * u + u * v * out(0, static_cast<Eigen::Index>(i));
  }
  return psi;
}

}  // namespace

std::string_view to_string(Batching b) noexcept {
  return b == Batching::kStratified ? "stratified" : "random";
}

Batching parse_batching(std::string_view tag) {
  if (tag == "stratified") return Batching::kStratified;
  if (tag == "random") return Batching::kRandom;
  throw ConfigError("pinn.batching", "expected stratified or random, got '" + std::string(tag) + "'");
}

std::vector<std::vector<std::size_t>> deal_batches(std::size_t n, std::size_t batch_count,
                                                   Batching batching, std::mt19937_64& rng) {
  if (batch_count == 0) throw std::invalid_argument("batch count must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (batching == Batching::kRandom) {
    std::shuffle(order.begin(), order.end(), rng);
    return split_batches(order, (n + batch_count - 1) / batch_count, false);
  }
  std::vector<std::vector<std::size_t>> out(std::min(batch_count, n));
  std::vector<std::size_t> slots(out.size());
  for (std::size_t start = 0; start < n; start += out.size()) {
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::shuffle(slots.begin(), slots.end(), rng);
    for (std::size_t i = start; i < std::min(n, start + out.size()); ++i) {
      out[slots[i - start]].push_back(i);
    }
  }
  return out;
}

TrainResult train_pinn(const HelmholtzProblem& problem, const PinnTrainConfig& config,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  problem.validate();
  config.net.validate();
  if (config.batch_count == 0) throw ConfigError("pinn.batches", "must be positive");

  const auto points = sample_collocation(problem);
  const auto grid = uniform_grid(problem, config.eval_points);
  std::vector<double> truth(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) truth[i] = analytic_solution(problem, grid[i]);

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, RngStream::kShuffle));
  std::vector<double> xs;

  TrainingHooks hooks;
  hooks.batches = [&](std::uint64_t) {
    return deal_batches(points.size(), config.batch_count, config.batching, shuffle_rng);
  };
  hooks.loss_and_grad = [&](const nn::Net& net, std::span<const std::size_t> batch,
                            std::span<double> grad) {
    xs.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) xs[i] = points[batch[i]];
    const auto lg = residual_loss_and_grad(problem, net, xs);
    std::copy(lg.grad.begin(), lg.grad.end(), grad.begin());
    return lg.loss;
  };
  hooks.metric = [&](const nn::Net& net) {
    return relative_error(trial_values(problem, net, grid), truth);
  };
  hooks.on_epoch = on_epoch;

  auto net = nn::Net::build(config.net, derive_seed(config.seed, RngStream::kInit));
  return run_training(std::move(net), config.optimizer, config.scheduler, config.epochs, hooks);
}

std::string field_profile_csv(const HelmholtzProblem& problem, const nn::Net& net,
                              std::size_t points) {
  const auto grid = uniform_grid(problem, points);
  const auto predicted = trial_values(problem, net, grid);
  std::string out = "x,psi_predicted,psi_true\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += format_double(grid[i]) + ',' + format_double(predicted[i]) + ',' +
           format_double(analytic_solution(problem, grid[i])) + '\n';
  }
  return out;
}

}  // namespace dlrs::pinn
