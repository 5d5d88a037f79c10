#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlrs/network.hpp"
#include "dlrs/optimizer.hpp"
#include "dlrs/scheduler.hpp"
#include "dlrs/training.hpp"

namespace dlrs::mnist {

enum class Split { kTrain, kTest };

/// Images as row-major count x (rows * cols) floats, each byte / 255.
struct Dataset {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t pixels_per_image() const noexcept { return rows * cols; }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * pixels_per_image(), pixels_per_image());
  }
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kCountMismatch, kBadLabel };

  IdxError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Whole file contents; gzip-compressed files are inflated transparently.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Parses big-endian IDX buffers: images (magic 0x00000803, dims count, rows,
/// cols) and labels (magic 0x00000801, dim count).
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  Split split = Split::kTrain);

Dataset read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::kTrain);

std::vector<std::uint8_t> encode_idx_images(const Dataset& data);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& data);
/// Writes uncompressed IDX files.
void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// The first `count` samples (all of them if count is 0 or too large).
Dataset take_first(const Dataset& data, std::size_t count);

struct BatchPlan {
  std::size_t batch_size = 64;
  std::uint64_t seed = 50;
  bool drop_last = false;
};

/// Batch orders for successive epochs, drawn from the plan's own shuffle
/// stream so nothing else in a run can shift them.
class BatchSampler {
 public:
  BatchSampler(const BatchPlan& plan, std::size_t dataset_size);
  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  BatchPlan plan_;
  std::size_t size_;
  std::mt19937_64 rng_;
};

/// 784-hidden-10 dense classifier with the given hidden activation.
nn::NetSpec dense_classifier(std::size_t inputs, std::size_t hidden, std::size_t classes,
                             nn::Activation hidden_activation = nn::Activation::kTanh);

struct ClassifierConfig {
  nn::NetSpec net = dense_classifier(784, 128, 10);
  optim::OptimizerConfig optimizer = optim::AdamConfig{};
  SchedulerConfig scheduler = DlrsConfig{0.01, 0.5, 1.0, 0.1, 1e-8, 1.0};
  std::uint64_t epochs = 10;
  BatchPlan batches;
  std::uint64_t seed = 50;
};

/// Mini-batch cross-entropy training; the epoch metric is test accuracy.
TrainResult train_classifier(const Dataset& train, const Dataset& test,
                             const ClassifierConfig& config,
                             const std::function<void(const EpochLog&)>& on_epoch = {});

/// Fraction of samples whose argmax logit (ties to the smallest class index)
/// matches the label.
double evaluate_accuracy(const nn::Net& net, const Dataset& data);

}  // namespace dlrs::mnist
