#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlrs/network.hpp"
#include "dlrs/optimizer.hpp"
#include "dlrs/scheduler.hpp"

namespace dlrs {

/// One row of records.csv.
struct RunRecord {
  std::uint64_t epoch = 0;  // 1-based
  double alpha = 0.0;       // learning rate used during the epoch
  double train_loss = 0.0;  // mean batch loss of the epoch
  double metric = 0.0;      // E_r percent (PINN) or test accuracy (MNIST)
  std::int64_t wall_ms = 0;
};

/// Everything logged about one epoch, including scheduler internals.
struct EpochLog {
  RunRecord record;
  SchedulerStep step;
  std::uint64_t batches = 0;
  std::uint64_t batch_order_hash = 0;
  std::int64_t scheduler_ns = 0;  // time spent inside Scheduler::step
};

struct TrainResult {
  nn::Net net;
  std::vector<EpochLog> epochs;
  /// Set when training stopped on a non-finite value; `net` then holds the
  /// parameters from the end of the last complete epoch.
  std::optional<std::string> abort_reason;
};

/// Independent random streams derived from one run seed.
enum class RngStream : std::uint64_t { kInit = 1, kShuffle = 2, kSample = 3 };

std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) noexcept;

/// FNV-1a over the sample indices of an epoch, in visiting order.
class BatchOrderHash {
 public:
  void add(std::uint64_t index) noexcept;
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

/// Splits a permutation of [0, n) into consecutive batches.
std::vector<std::vector<std::size_t>> split_batches(std::span<const std::size_t> order,
                                                    std::size_t batch_size, bool drop_last);

struct TrainingHooks {
  /// Batches of sample indices for a 1-based epoch.
  std::function<std::vector<std::vector<std::size_t>>(std::uint64_t epoch)> batches;
  /// Loss at the current parameters for one batch; writes the gradient.
  std::function<double(const nn::Net& net, std::span<const std::size_t> batch,
                       std::span<double> grad)>
      loss_and_grad;
  /// Evaluation metric reported for the epoch.
  std::function<double(const nn::Net& net)> metric;
  /// Called after each completed epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

/// The shared epoch loop: per-batch loss and optimizer step at the current
/// learning rate, per-batch losses fed to an EpochLossSummary, one scheduler
/// step at the end of each epoch.
TrainResult run_training(nn::Net net, const optim::OptimizerConfig& optimizer,
                         const SchedulerConfig& scheduler, std::uint64_t epochs,
                         const TrainingHooks& hooks);

/// Shortest round-trip decimal, independent of the global locale.
std::string format_double(double value);

/// Header `epoch,alpha,train_loss,metric,wall_ms`. wall_ms is written as 0
/// unless `wall_clock` is set, so records stay byte-identical across reruns.
std::string records_csv(std::span<const EpochLog> epochs, bool wall_clock);
/// Header `epoch,delta_l,case,alpha`; alpha is the rate chosen for the next epoch.
std::string lr_trace_csv(std::span<const EpochLog> epochs);
/// Header `epoch,wall_ms,scheduler_ns,batches,batch_order_hash`.
std::string timing_csv(std::span<const EpochLog> epochs);

}  // namespace dlrs
