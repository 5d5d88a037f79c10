#include "dlrs/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <system_error>

#include "dlrs/error.hpp"
#include "dlrs/mnist.hpp"
#include "dlrs/pinn.hpp"

namespace dlrs::harness {

namespace fs = std::filesystem;

namespace {

class RunDirError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
  out << text;
  if (!out) throw std::system_error(errno, std::generic_category(), "write failed: " + path.string());
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw RunDirError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw RunDirError(dir.string() + " is not empty; pass --force to overwrite");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

std::function<void(const EpochLog&)> progress(std::ostream* log, const std::string& tag,
                                              std::uint64_t epochs) {
  if (!log) return {};
  const std::uint64_t every = std::max<std::uint64_t>(1, epochs / 20);
  return [log, tag, epochs, every](const EpochLog& e) {
    const auto& r = e.record;
    if (r.epoch % every != 0 && r.epoch != 1 && r.epoch != epochs) return;
    char line[200];
    std::snprintf(line, sizeof(line), "[%s] epoch %llu/%llu  alpha %.4g  loss %.6g  metric %.6g\n",
                  tag.c_str(), static_cast<unsigned long long>(r.epoch),
                  static_cast<unsigned long long>(epochs), r.alpha, r.train_loss, r.metric);
    *log << line << std::flush;
  };
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string slug(const std::string& scheduler) {
  return scheduler == "adacomp" ? "adacomp-reconstructed" : scheduler;
}

}  // namespace

Execution replay_losses(const ExperimentConfig& cfg) {
  Scheduler scheduler(cfg.scheduler_config());
  Execution ex;
  auto& out = ex.epochs;
  std::uint64_t epoch = 0;
  for (const auto& group : cfg.synthetic_losses) {
    ++epoch;
    EpochLossSummary summary;
    BatchOrderHash hash;
    for (std::size_t i = 0; i < group.size(); ++i) {
      summary.record(group[i]);
      hash.add(i);
    }
    EpochLog log;
    log.record.epoch = epoch;
    log.record.alpha = scheduler.alpha();
    log.record.train_loss = summary.count() ? summary.mean() : 0.0;
    log.batches = summary.count();
    log.batch_order_hash = hash.value();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      log.step = scheduler.step(summary);
    } catch (const std::domain_error& e) {
      ex.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    log.scheduler_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    out.push_back(log);
  }
  return ex;
}

Execution execute(const ExperimentConfig& cfg, std::ostream* log) {
  Execution ex;
  switch (cfg.workload) {
    case Workload::kSynthetic: {
      ex = replay_losses(cfg);
      break;
    }
    case Workload::kPinn: {
      auto problem = cfg.problem;
      problem.seed = cfg.seed;
      auto result = pinn::train_pinn(problem, cfg.pinn_config(), progress(log, cfg.name, cfg.epochs));
      ex.net.emplace(std::move(result.net));
      ex.epochs = std::move(result.epochs);
      ex.abort_reason = std::move(result.abort_reason);
      break;
    }
    case Workload::kMnist: {
      const auto train = mnist::take_first(
          mnist::read_idx(cfg.train_images, cfg.train_labels, mnist::Split::kTrain), cfg.train_limit);
      const auto test = mnist::take_first(
          mnist::read_idx(cfg.test_images, cfg.test_labels, mnist::Split::kTest), cfg.test_limit);
      auto result =
          mnist::train_classifier(train, test, cfg.classifier_config(), progress(log, cfg.name, cfg.epochs));
      ex.net.emplace(std::move(result.net));
      ex.epochs = std::move(result.epochs);
      ex.abort_reason = std::move(result.abort_reason);
      break;
    }
  }
  return ex;
}

RunOutcome run(const ExperimentConfig& cfg, const RunOptions& options) {
  RunOutcome outcome;
  outcome.dir = options.out_root / cfg.name;
  try {
    prepare_dir(outcome.dir, options.force);
    // The echo goes first so an interrupted run still documents itself.
    write_text(outcome.dir / "config-echo.json", echo_json(cfg));

    auto ex = execute(cfg, options.log);
    outcome.epochs = ex.epochs;
    write_text(outcome.dir / "records.csv", records_csv(ex.epochs, cfg.record_wall_clock));
    write_text(outcome.dir / "timing.csv", timing_csv(ex.epochs));
    if (options.write_lr_trace) write_text(outcome.dir / "lr_trace.csv", lr_trace_csv(ex.epochs));
    if (ex.net) {
      nn::save_checkpoint(*ex.net, outcome.dir / "checkpoint");
      if (cfg.workload == Workload::kPinn) {
        auto problem = cfg.problem;
        problem.seed = cfg.seed;
        write_text(outcome.dir / "field.csv",
                   pinn::field_profile_csv(problem, *ex.net, cfg.profile_points));
      }
    }
    if (ex.abort_reason) {
      outcome.exit_code = kExitDiverged;
      outcome.error = "training aborted after epoch " + std::to_string(ex.epochs.size()) + ": " +
                      *ex.abort_reason;
    }
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitConfig;
    outcome.error = e.what();
  } catch (const NonFiniteError& e) {
    outcome.exit_code = kExitDiverged;
    outcome.error = e.what();
  } catch (const std::domain_error& e) {
    // Scheduler refused an epoch (e.g. all-zero losses).
    outcome.exit_code = kExitDiverged;
    outcome.error = e.what();
  } catch (const mnist::IdxError& e) {
    outcome.exit_code = kExitIo;
    outcome.error = e.what();
  } catch (const RunDirError& e) {
    outcome.exit_code = kExitIo;
    outcome.error = e.what();
  } catch (const std::system_error& e) {
    outcome.exit_code = kExitIo;
    outcome.error = e.what();
  }
  return outcome;
}

CompareOutcome compare(const ExperimentConfig& cfg, const std::vector<std::string>& schedulers,
                       const RunOptions& options) {
  CompareOutcome outcome;
  outcome.dir = options.out_root / cfg.name;

  std::set<std::string> seen;
  for (const auto& s : schedulers) {
    if (!seen.insert(s).second) throw ConfigError("compare.schedulers", "duplicate scheduler '" + s + "'");
    validate(cfg.scheduler_config(s));
  }
  if (schedulers.empty()) throw ConfigError("compare.schedulers", "no schedulers to compare");

  prepare_dir(outcome.dir, options.force);
  auto base = cfg;
  base.compare_schedulers = schedulers;
  write_text(outcome.dir / "config-echo.json", echo_json(base));

  RunOptions sub = options;
  sub.out_root = outcome.dir;
  sub.force = false;
  for (const auto& s : schedulers) {
    auto sub_cfg = cfg;
    sub_cfg.name = s;
    sub_cfg.scheduler = s;
    sub_cfg.compare_schedulers.clear();
    auto result = run(sub_cfg, sub);
    if (result.exit_code != kExitOk && options.log) {
      *options.log << "[" << s << "] failed: " << result.error.value_or("unknown error") << "\n";
    }
    if (result.exit_code != kExitOk && outcome.exit_code == kExitOk) {
      outcome.exit_code = result.exit_code;
    }
    outcome.runs.emplace_back(s, std::move(result));
  }

  std::string csv = "scheduler,epoch,alpha,loss,metric\n";
  std::string hashes = "scheduler,epoch,batch_order_hash\n";
  std::map<std::uint64_t, std::uint64_t> first_hash;
  for (const auto& [s, result] : outcome.runs) {
    for (const auto& e : result.epochs) {
      const auto& r = e.record;
      csv += slug(s) + ',' + std::to_string(r.epoch) + ',' + format_double(r.alpha) + ',' +
             format_double(r.train_loss) + ',' + format_double(r.metric) + '\n';
      hashes += slug(s) + ',' + std::to_string(r.epoch) + ',' + hex64(e.batch_order_hash) + '\n';
      const auto [it, inserted] = first_hash.emplace(r.epoch, e.batch_order_hash);
      if (!inserted && it->second != e.batch_order_hash) outcome.identical_batch_orders = false;
    }
  }
  write_text(outcome.dir / "compare.csv", csv);
  write_text(outcome.dir / "batch_hashes.csv", hashes);
  return outcome;
}

}  // namespace dlrs::harness
