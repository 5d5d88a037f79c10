#include "dlrs/mnist.hpp"

#include <algorithm>
#include <numeric>

#include "dlrs/error.hpp"

namespace dlrs::mnist {

namespace {

Eigen::MatrixXd gather(const Dataset& data, std::span<const std::size_t> indices) {
  const auto dim = static_cast<Eigen::Index>(data.pixels_per_image());
  Eigen::MatrixXd batch(dim, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto img = data.image(indices[c]);
    batch.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const Eigen::VectorXf>(img.data(), dim).cast<double>();
  }
  return batch;
}

}  // namespace

BatchSampler::BatchSampler(const BatchPlan& plan, std::size_t dataset_size)
    : plan_(plan), size_(dataset_size), rng_(derive_seed(plan.seed, RngStream::kShuffle)) {
  if (plan.batch_size == 0) throw ConfigError("mnist.batch_size", "must be positive");
}

std::vector<std::vector<std::size_t>> BatchSampler::next_epoch() {
  std::vector<std::size_t> order(size_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);
  return split_batches(order, plan_.batch_size, plan_.drop_last);
}

nn::NetSpec dense_classifier(std::size_t inputs, std::size_t hidden, std::size_t classes,
                             nn::Activation hidden_activation) {
  return nn::NetSpec{{inputs, hidden, classes},
                     {hidden_activation, nn::Activation::kLogSoftmax}};
}

TrainResult train_classifier(const Dataset& train, const Dataset& test,
                             const ClassifierConfig& config,
                             const std::function<void(const EpochLog&)>& on_epoch) {
  config.net.validate();
  if (train.size() == 0) throw ConfigError("mnist.train_images", "training set is empty");
  if (config.net.sizes.front() != train.pixels_per_image()) {
    throw ConfigError("net", "input width does not match the image size");
  }

  BatchSampler sampler(config.batches, train.size());
  std::vector<std::uint8_t> labels;

  TrainingHooks hooks;
  hooks.batches = [&](std::uint64_t) { return sampler.next_epoch(); };
  hooks.loss_and_grad = [&](const nn::Net& net, std::span<const std::size_t> batch,
                            std::span<double> grad) {
    labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = train.labels[batch[i]];
    return nn::classifier_loss_and_grad(net, gather(train, batch), labels, grad);
  };
  hooks.metric = [&](const nn::Net& net) { return test.size() ? evaluate_accuracy(net, test) : 0.0; };
  hooks.on_epoch = on_epoch;

  auto net = nn::Net::build(config.net, derive_seed(config.seed, RngStream::kInit));
  return run_training(std::move(net), config.optimizer, config.scheduler, config.epochs, hooks);
}

double evaluate_accuracy(const nn::Net& net, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("accuracy of an empty dataset");
  constexpr std::size_t kChunk = 1000;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Eigen::MatrixXd out = net.forward_batch(gather(data, idx));
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < out.rows(); ++r) {
        if (out(r, c) > out(best, c)) best = r;
      }
      if (best == data.labels[start + static_cast<std::size_t>(c)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace dlrs::mnist
