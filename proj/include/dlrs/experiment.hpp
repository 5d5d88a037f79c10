#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dlrs/config.hpp"
#include "dlrs/training.hpp"

namespace dlrs::harness {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitDiverged = 3,
  kExitIo = 4,
};

struct RunOptions {
  std::filesystem::path out_root = "runs";
  bool force = false;
  bool write_lr_trace = false;
  std::ostream* log = nullptr;  // progress lines; nullptr for silence
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  std::vector<EpochLog> epochs;
  std::optional<std::string> error;
};

struct Execution {
  std::optional<nn::Net> net;  // empty for synthetic workloads
  std::vector<EpochLog> epochs;
  std::optional<std::string> abort_reason;
};

/// Trains per `cfg` without touching the filesystem beyond reading data.
/// Synthetic workloads replay scripted losses through the scheduler only.
Execution execute(const ExperimentConfig& cfg, std::ostream* log = nullptr);
/// Scripted-loss replay: one epoch per loss group, no model. A group the
/// scheduler cannot consume (e.g. all zeros) ends the replay with
/// abort_reason set and the earlier epochs kept.
Execution replay_losses(const ExperimentConfig& cfg);

/// Writes <out_root>/<name>/{config-echo.json, records.csv, timing.csv,
/// checkpoint.json, checkpoint.bin} plus field.csv for PINN runs and
/// lr_trace.csv when requested. Refuses a non-empty directory unless forced.
RunOutcome run(const ExperimentConfig& cfg, const RunOptions& options);

struct CompareOutcome {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  std::vector<std::pair<std::string, RunOutcome>> runs;
  /// All completed sub-runs saw the same batch order hash every epoch.
  bool identical_batch_orders = true;
};

/// One sub-run per scheduler in <out_root>/<name>/<scheduler>/, sharing seed
/// and data order, plus compare.csv (scheduler,epoch,alpha,loss,metric) and
/// batch_hashes.csv. A failing sub-run is reported and the rest still run.
CompareOutcome compare(const ExperimentConfig& cfg, const std::vector<std::string>& schedulers,
                       const RunOptions& options);

}  // namespace dlrs::harness
