#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dlrs/mnist.hpp"
#include "dlrs/optimizer.hpp"
#include "dlrs/pinn.hpp"
#include "dlrs/scheduler.hpp"

namespace dlrs::harness {

enum class Workload { kPinn, kMnist, kSynthetic };

std::string_view to_string(Workload w) noexcept;

/// Raw `key = value` pairs with the line each came from (0 for JSON input).
struct RawConfig {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

/// Flat TOML-like text: one `key = value` per line, `#` comments, optional
/// double quotes around values. Throws ConfigError with the line number.
RawConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});
/// A flat JSON object with the same keys (the format of config-echo.json).
RawConfig parse_config_json(std::string_view text, const std::filesystem::path& base_dir = {});
/// Picks the parser by extension (.json or anything else).
RawConfig load_config_file(const std::filesystem::path& path);

/// Fully resolved experiment description; every field has a value.
struct ExperimentConfig {
  std::string name = "run";
  Workload workload = Workload::kPinn;
  std::uint64_t seed = 50;
  std::uint64_t epochs = 0;
  bool record_wall_clock = false;

  std::string scheduler = "dlrs";
  double alpha0 = 1e-3;
  double delta_d = 0.5;
  double delta_o = 1.0;
  double delta_i = 0.1;
  double alpha_min = 1e-8;
  double alpha_max = 1.0;
  double gamma = 0.1;
  double decay_rate = 0.9;

  std::string optimizer = "adam";
  optim::AdamConfig adam;

  std::vector<std::size_t> hidden;
  std::vector<nn::Activation> activations;

  pinn::HelmholtzProblem problem;
  std::size_t pinn_batches = 10;
  pinn::Batching pinn_batching = pinn::Batching::kStratified;
  std::size_t eval_points = 512;
  std::size_t profile_points = 512;

  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 6000;
  std::size_t test_limit = 1000;
  std::size_t batch_size = 64;
  bool drop_last = false;

  std::vector<std::vector<double>> synthetic_losses;

  std::vector<std::string> compare_schedulers;

  /// Scheduler parameters for `name` (one of dlrs, adacomp, constant, decay).
  SchedulerConfig scheduler_config(const std::string& name) const;
  SchedulerConfig scheduler_config() const { return scheduler_config(scheduler); }
  optim::OptimizerConfig optimizer_config() const;
  nn::NetSpec net_spec() const;
  pinn::PinnTrainConfig pinn_config() const;
  mnist::ClassifierConfig classifier_config() const;
};

/// Applies workload defaults, then the raw values; rejects unknown keys,
/// keys that do not apply to the workload, and invalid values. Throws
/// ConfigError naming the key (and line when known).
ExperimentConfig resolve(const RawConfig& raw);

/// Flat JSON with every key that influenced the run; parse_config_json of
/// this text resolves to the same configuration.
std::string echo_json(const ExperimentConfig& cfg);

}  // namespace dlrs::harness
