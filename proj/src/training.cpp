#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dlrs/error.hpp"
#include "dlrs/training.hpp"

namespace dlrs {

std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) noexcept {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void BatchOrderHash::add(std::uint64_t index) noexcept {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (index >> (8 * i)) & 0xffu;
    state_ *= 0x100000001b3ull;
  }
}

std::vector<std::vector<std::size_t>> split_batches(std::span<const std::size_t> order,
                                                    std::size_t batch_size, bool drop_last) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (drop_last && end - start < batch_size) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

TrainResult run_training(nn::Net net, const optim::OptimizerConfig& optimizer_cfg,
                         const SchedulerConfig& scheduler_cfg, std::uint64_t epochs,
                         const TrainingHooks& hooks) {
  using Clock = std::chrono::steady_clock;
  Scheduler scheduler(scheduler_cfg);
  optim::Optimizer optimizer(optimizer_cfg, net.parameter_count());
  TrainResult result{net, {}, std::nullopt};
  std::vector<double> grad(net.parameter_count());
  EpochLossSummary summary;

  for (std::uint64_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto started = Clock::now();
    const std::vector<double> snapshot(net.parameters().begin(), net.parameters().end());
    const double alpha = scheduler.alpha();
    summary.reset();
    BatchOrderHash hash;
    EpochLog log;

    try {
      const auto batches = hooks.batches(epoch);
      for (const auto& batch : batches) {
        for (auto idx : batch) hash.add(idx);
        std::fill(grad.begin(), grad.end(), 0.0);
        const double loss = hooks.loss_and_grad(net, batch, grad);
        summary.record(loss);
        optimizer.step(net.parameters(), grad, alpha);
      }
      log.batches = batches.size();
      if (summary.count() == 0) throw std::invalid_argument("epoch produced no batches");

      const auto sched_start = Clock::now();
      log.step = scheduler.step(summary);
      log.scheduler_ns =
          std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - sched_start).count();

      log.record.metric = hooks.metric ? hooks.metric(net) : 0.0;
    } catch (const NonFiniteError& e) {
      std::copy(snapshot.begin(), snapshot.end(), net.parameters().begin());
      result.net = net;
      result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }

    log.record.epoch = epoch;
    log.record.alpha = alpha;
    log.record.train_loss = summary.mean();
    log.batch_order_hash = hash.value();
    log.record.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
    result.epochs.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  result.net = std::move(net);
  return result;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string records_csv(std::span<const EpochLog> epochs, bool wall_clock) {
  std::string out = "epoch,alpha,train_loss,metric,wall_ms\n";
  for (const auto& e : epochs) {
    const auto& r = e.record;
    out += std::to_string(r.epoch) + ',' + format_double(r.alpha) + ',' +
           format_double(r.train_loss) + ',' + format_double(r.metric) + ',' +
           std::to_string(wall_clock ? r.wall_ms : 0) + '\n';
  }
  return out;
}

std::string lr_trace_csv(std::span<const EpochLog> epochs) {
  std::string out = "epoch,delta_l,case,alpha\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.record.epoch) + ',';
    if (e.step.slope) out += format_double(*e.step.slope);
    out += ',';
    if (e.step.regime) out += to_string(*e.step.regime);
    out += ',' + format_double(e.step.alpha_next) + '\n';
  }
  return out;
}

std::string timing_csv(std::span<const EpochLog> epochs) {
  std::string out = "epoch,wall_ms,scheduler_ns,batches,batch_order_hash\n";
  for (const auto& e : epochs) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(e.batch_order_hash));
    out += std::to_string(e.record.epoch) + ',' + std::to_string(e.record.wall_ms) + ',' +
           std::to_string(e.scheduler_ns) + ',' + std::to_string(e.batches) + ',' + hash + '\n';
  }
  return out;
}

}  // namespace dlrs
