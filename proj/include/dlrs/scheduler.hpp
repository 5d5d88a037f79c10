#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

namespace dlrs {

/// Streaming statistic over one epoch's per-batch losses.
///
/// Keeps only what the DLRS update consumes (first loss, last loss, running
/// sum, batch count), so its footprint does not depend on the number of
/// batches in the epoch.
class EpochLossSummary {
 public:
  static constexpr std::size_t kSerializedSize = 32;

  /// Appends one batch loss. Throws NonFiniteError naming the batch index when
  /// the loss is NaN, infinite or negative.
  void record(double batch_loss);

  void reset() noexcept { *this = EpochLossSummary{}; }

  std::uint64_t count() const noexcept { return count_; }
  double first_loss() const;
  double last_loss() const;
  double running_sum() const noexcept { return running_sum_; }
  double mean() const;

  /// Fixed-size little-endian encoding: first, last, sum, count.
  std::array<std::byte, kSerializedSize> serialize() const noexcept;

 private:
  double first_loss_ = 0.0;
  double last_loss_ = 0.0;
  double running_sum_ = 0.0;
  std::uint64_t count_ = 0;
};

/// (last - first) / mean. Throws std::domain_error on an empty summary or a
/// zero mean.
double normalized_slope(const EpochLossSummary& summary);

enum class DlrsRegime { kDecremental, kStagnation, kIncremental };

std::string_view to_string(DlrsRegime regime) noexcept;

/// slope > 1 is divergent, 0 <= slope <= 1 stagnant, slope < 0 convergent.
DlrsRegime classify_slope(double slope);

/// floor(log10(alpha)), exact at representable powers of ten.
int order_of_magnitude(double alpha);

struct DlrsConfig {
  double alpha0 = 1e-3;
  double delta_d = 0.5;
  double delta_o = 1.0;
  double delta_i = 0.1;
  double alpha_min = 1e-8;
  double alpha_max = 1.0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct DlrsState {
  double alpha = 1e-3;
  std::uint64_t epoch = 0;
};

/// Signed adjustment 10^n * delta_case * slope that is subtracted from alpha.
double dlrs_adjustment(double alpha, const DlrsConfig& cfg, double slope);

/// One epoch-end DLRS update, clamped to [alpha_min, alpha_max].
DlrsState dlrs_update(const DlrsState& state, const DlrsConfig& cfg, double slope);

// Sign-based multiplicative rule driven by the difference of the last two
// loss values. Only the loss difference of the original method is known, so
// this is a reconstruction and is labelled as such wherever it is reported.
struct AdacompConfig {
  double alpha0 = 1e-3;
  double gamma = 0.1;
  double alpha_min = 1e-8;
  double alpha_max = 1.0;

  void validate() const;
};

struct AdacompState {
  double alpha = 1e-3;
  std::optional<double> previous_loss;
};

AdacompState adacomp_update(const AdacompState& state, double current_loss,
                            const AdacompConfig& cfg);

struct ConstantConfig {
  double alpha0 = 1e-3;
  void validate() const;
};

struct DecayConfig {
  double alpha0 = 1e-3;
  double rate = 0.9;
  void validate() const;
};

using SchedulerConfig = std::variant<ConstantConfig, DecayConfig, DlrsConfig, AdacompConfig>;

std::string_view scheduler_name(const SchedulerConfig& cfg) noexcept;
std::string_view scheduler_label(const SchedulerConfig& cfg) noexcept;
double initial_alpha(const SchedulerConfig& cfg) noexcept;
void validate(const SchedulerConfig& cfg);

/// What a scheduler decided at the end of an epoch.
struct SchedulerStep {
  double alpha_next = 0.0;
  std::optional<double> slope;       // set whenever the summary mean is positive
  std::optional<DlrsRegime> regime;  // DLRS only
};

/// Uniform per-epoch contract over the four learning-rate policies.
class Scheduler {
 public:
  explicit Scheduler(SchedulerConfig cfg);

  double alpha() const noexcept { return alpha_; }
  std::uint64_t epochs_seen() const noexcept { return epochs_; }
  const SchedulerConfig& config() const noexcept { return cfg_; }
  std::string_view name() const noexcept { return scheduler_name(cfg_); }

  /// Consumes a finished epoch and moves to the next learning rate.
  SchedulerStep step(const EpochLossSummary& summary);

 private:
  SchedulerConfig cfg_;
  double alpha_;
  std::uint64_t epochs_ = 0;
  std::optional<double> previous_loss_;
};

}  // namespace dlrs
