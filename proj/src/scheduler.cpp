#include "dlrs/scheduler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "dlrs/error.hpp"

namespace dlrs {

namespace {

template <typename T>
void put_le(std::byte* out, T value) {
  std::uint64_t bits = 0;
  static_assert(sizeof(T) == sizeof(bits));
  std::memcpy(&bits, &value, sizeof(bits));
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::byte>((bits >> (8 * i)) & 0xffu);
}

void require_positive(double value, const char* field) {
  if (!(std::isfinite(value) && value > 0.0)) {
    throw ConfigError(field, "must be a finite positive number, got " + std::to_string(value));
  }
}

void require_bounds(double alpha0, double alpha_min, double alpha_max) {
  require_positive(alpha_min, "alpha_min");
  require_positive(alpha_max, "alpha_max");
  if (alpha_min > alpha_max) throw ConfigError("alpha_min", "must not exceed alpha_max");
  if (alpha0 < alpha_min || alpha0 > alpha_max) {
    throw ConfigError("alpha0", "must lie within [alpha_min, alpha_max]");
  }
}

}  // namespace

void EpochLossSummary::record(double batch_loss) {
  if (!std::isfinite(batch_loss) || batch_loss < 0.0) {
    throw NonFiniteError("batch " + std::to_string(count_) + ": loss " +
                         std::to_string(batch_loss) +
                         " is not a finite non-negative value (diverged forward pass?)");
  }
  if (count_ == 0) first_loss_ = batch_loss;
  last_loss_ = batch_loss;
  running_sum_ += batch_loss;
  ++count_;
}

double EpochLossSummary::first_loss() const {
  if (count_ == 0) throw std::domain_error("epoch loss summary is empty");
  return first_loss_;
}

double EpochLossSummary::last_loss() const {
  if (count_ == 0) throw std::domain_error("epoch loss summary is empty");
  return last_loss_;
}

double EpochLossSummary::mean() const {
  if (count_ == 0) throw std::domain_error("epoch loss summary is empty");
  return running_sum_ / static_cast<double>(count_);
}

std::array<std::byte, EpochLossSummary::kSerializedSize> EpochLossSummary::serialize()
    const noexcept {
  std::array<std::byte, kSerializedSize> out{};
  put_le(out.data(), first_loss_);
  put_le(out.data() + 8, last_loss_);
  put_le(out.data() + 16, running_sum_);
  put_le(out.data() + 24, count_);
  return out;
}

double normalized_slope(const EpochLossSummary& summary) {
  const double mean = summary.mean();
  if (mean == 0.0) {
    throw std::domain_error("normalized slope undefined: mean batch loss is zero");
  }
  return (summary.last_loss() - summary.first_loss()) / mean;
}

std::string_view to_string(DlrsRegime regime) noexcept {
  switch (regime) {
    case DlrsRegime::kDecremental: return "decremental";
    case DlrsRegime::kStagnation: return "stagnation";
    case DlrsRegime::kIncremental: return "incremental";
  }
  return "";
}

DlrsRegime classify_slope(double slope) {
  if (std::isnan(slope)) throw std::domain_error("cannot classify a NaN loss slope");
  if (slope > 1.0) return DlrsRegime::kDecremental;
  if (slope >= 0.0) return DlrsRegime::kStagnation;
  return DlrsRegime::kIncremental;
}

int order_of_magnitude(double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) {
    throw std::domain_error("order of magnitude needs a finite positive value");
  }
  int n = static_cast<int>(std::floor(std::log10(alpha)));
  // log10 may land a hair below an integer at exact powers of ten.
  if (std::pow(10.0, n + 1) <= alpha) ++n;
  if (std::pow(10.0, n) > alpha) --n;
  return n;
}

void DlrsConfig::validate() const {
  require_positive(alpha0, "alpha0");
  require_positive(delta_d, "delta_d");
  require_positive(delta_o, "delta_o");
  require_positive(delta_i, "delta_i");
  require_bounds(alpha0, alpha_min, alpha_max);
}

double dlrs_adjustment(double alpha, const DlrsConfig& cfg, double slope) {
  if (!std::isfinite(slope)) throw std::domain_error("DLRS needs a finite loss slope");
  double delta = cfg.delta_i;
  switch (classify_slope(slope)) {
    case DlrsRegime::kDecremental: delta = cfg.delta_d; break;
    case DlrsRegime::kStagnation: delta = cfg.delta_o; break;
    case DlrsRegime::kIncremental: delta = cfg.delta_i; break;
  }
  return std::pow(10.0, order_of_magnitude(alpha)) * delta * slope;
}

DlrsState dlrs_update(const DlrsState& state, const DlrsConfig& cfg, double slope) {
  if (state.alpha < cfg.alpha_min || state.alpha > cfg.alpha_max) {
    throw std::domain_error("DLRS state alpha outside [alpha_min, alpha_max]");
  }
  const double next = state.alpha - dlrs_adjustment(state.alpha, cfg, slope);
  return DlrsState{std::clamp(next, cfg.alpha_min, cfg.alpha_max), state.epoch + 1};
}

void AdacompConfig::validate() const {
  require_positive(alpha0, "alpha0");
  require_positive(gamma, "gamma");
  if (gamma >= 1.0) throw ConfigError("gamma", "must be below 1");
  require_bounds(alpha0, alpha_min, alpha_max);
}

AdacompState adacomp_update(const AdacompState& state, double current_loss,
                            const AdacompConfig& cfg) {
  if (!std::isfinite(current_loss)) {
    throw NonFiniteError("adacomp: loss " + std::to_string(current_loss) + " is not finite");
  }
  AdacompState next = state;
  next.previous_loss = current_loss;
  if (!state.previous_loss) return next;

  const double diff = *state.previous_loss - current_loss;
  double alpha = state.alpha;
  if (diff > 0.0) {
    alpha *= 1.0 + cfg.gamma;
  } else if (diff < 0.0) {
    alpha *= 1.0 - cfg.gamma;
  }
  next.alpha = std::clamp(alpha, cfg.alpha_min, cfg.alpha_max);
  return next;
}

void ConstantConfig::validate() const { require_positive(alpha0, "alpha0"); }

void DecayConfig::validate() const {
  require_positive(alpha0, "alpha0");
  require_positive(rate, "decay_rate");
  if (rate > 1.0) throw ConfigError("decay_rate", "must not exceed 1");
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

std::string_view scheduler_name(const SchedulerConfig& cfg) noexcept {
  return std::visit(Overloaded{
                        [](const ConstantConfig&) { return std::string_view("constant"); },
                        [](const DecayConfig&) { return std::string_view("decay"); },
                        [](const DlrsConfig&) { return std::string_view("dlrs"); },
                        [](const AdacompConfig&) { return std::string_view("adacomp"); },
                    },
                    cfg);
}

std::string_view scheduler_label(const SchedulerConfig& cfg) noexcept {
  return std::visit(
      Overloaded{
          [](const ConstantConfig&) { return std::string_view("Constant"); },
          [](const DecayConfig&) { return std::string_view("Exponential decay"); },
          [](const DlrsConfig&) { return std::string_view("DLRS"); },
          [](const AdacompConfig&) { return std::string_view("Adacomp (reconstructed)"); },
      },
      cfg);
}

double initial_alpha(const SchedulerConfig& cfg) noexcept {
  return std::visit([](const auto& c) { return c.alpha0; }, cfg);
}

void validate(const SchedulerConfig& cfg) {
  std::visit([](const auto& c) { c.validate(); }, cfg);
}

Scheduler::Scheduler(SchedulerConfig cfg) : cfg_(std::move(cfg)), alpha_(initial_alpha(cfg_)) {
  dlrs::validate(cfg_);
}

SchedulerStep Scheduler::step(const EpochLossSummary& summary) {
  SchedulerStep out;
  const double mean = summary.mean();
  if (mean > 0.0) out.slope = normalized_slope(summary);

  std::visit(Overloaded{
                 [&](const ConstantConfig& c) { alpha_ = c.alpha0; },
                 [&](const DecayConfig& c) {
                   alpha_ = c.alpha0 * std::pow(c.rate, static_cast<double>(epochs_ + 1));
                 },
                 [&](const DlrsConfig& c) {
                   const double slope = normalized_slope(summary);
                   out.regime = classify_slope(slope);
                   alpha_ = dlrs_update(DlrsState{alpha_, epochs_}, c, slope).alpha;
                 },
                 [&](const AdacompConfig& c) {
                   const auto next = adacomp_update(AdacompState{alpha_, previous_loss_}, mean, c);
                   alpha_ = next.alpha;
                   previous_loss_ = next.previous_loss;
                 },
             },
             cfg_);
  ++epochs_;
  out.alpha_next = alpha_;
  return out;
}

}  // namespace dlrs
