// dlrs: run, compare and audit learning-rate scheduler experiments.
//
//   dlrs run      --config exp.conf [--out runs] [--seed N] [--force]
//   dlrs compare  --config exp.conf [--schedulers dlrs,adacomp] ...
//   dlrs lr-trace --config exp.conf ...
//   dlrs validate --config exp.conf

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dlrs/config.hpp"
#include "dlrs/error.hpp"
#include "dlrs/experiment.hpp"

namespace {

using namespace dlrs::harness;

struct Common {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool outputs) {
  cmd->add_option("--config", c.config, "experiment config (key = value text or JSON)")->required();
  cmd->add_option("--seed", c.seed, "override the config seed");
  if (outputs) {
    cmd->add_option("--out", c.out, "root directory for run outputs");
    cmd->add_flag("--force", c.force, "overwrite an existing run directory");
    cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
  }
}

ExperimentConfig load(const Common& c) {
  auto cfg = resolve(load_config_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

int report(const RunOutcome& r) {
  if (r.exit_code != kExitOk) {
    std::cerr << "error: " << r.error.value_or("unknown error") << "\n";
  } else {
    std::cerr << "wrote " << r.dir.string() << "\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-rate scheduler experiments"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, trace_opts, val_opts;
  std::string schedulers;
  auto* run_cmd = app.add_subcommand("run", "train and write records, config echo and checkpoint");
  add_common(run_cmd, run_opts, true);
  auto* cmp_cmd = app.add_subcommand("compare", "run each scheduler on identical data order");
  add_common(cmp_cmd, cmp_opts, true);
  cmp_cmd->add_option("--schedulers", schedulers, "comma-separated list (default: compare.schedulers)");
  auto* trace_cmd = app.add_subcommand("lr-trace", "run and log epoch, delta_l, case, alpha");
  add_common(trace_cmd, trace_opts, true);
  auto* val_cmd = app.add_subcommand("validate", "check a config and print the resolved form");
  add_common(val_cmd, val_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*val_cmd) {
      std::cout << echo_json(load(val_opts));
      return kExitOk;
    }
    if (*run_cmd || *trace_cmd) {
      const Common& c = *run_cmd ? run_opts : trace_opts;
      const auto cfg = load(c);
      RunOptions opts{c.out, c.force, static_cast<bool>(*trace_cmd), c.quiet ? nullptr : &std::cerr};
      const auto outcome = run(cfg, opts);
      if (*trace_cmd && outcome.exit_code != kExitConfig && outcome.exit_code != kExitIo) {
        std::cout << dlrs::lr_trace_csv(outcome.epochs);
      }
      return report(outcome);
    }
    if (*cmp_cmd) {
      const auto cfg = load(cmp_opts);
      std::vector<std::string> list = cfg.compare_schedulers;
      if (!schedulers.empty()) {
        list.clear();
        std::string item;
        for (char ch : schedulers + ",") {
          if (ch == ',') {
            if (!item.empty()) list.push_back(item);
            item.clear();
          } else if (ch != ' ') {
            item += ch;
          }
        }
      }
      RunOptions opts{cmp_opts.out, cmp_opts.force, false, cmp_opts.quiet ? nullptr : &std::cerr};
      const auto outcome = compare(cfg, list, opts);
      for (const auto& [name, r] : outcome.runs) {
        std::cerr << name << ": "
                  << (r.exit_code == kExitOk ? std::string("ok") : r.error.value_or("failed")) << "\n";
      }
      std::cerr << "batch orders " << (outcome.identical_batch_orders ? "identical" : "DIFFER")
                << " across schedulers\n";
      std::cerr << "wrote " << (outcome.dir / "compare.csv").string() << "\n";
      return outcome.exit_code;
    }
  } catch (const dlrs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
