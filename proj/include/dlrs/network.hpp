#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlrs/dual2.hpp"
#include "dlrs/tape.hpp"

namespace dlrs::nn {

enum class Activation { kIdentity, kSin, kCos, kTanh, kRelu, kLogSoftmax };

std::string_view to_string(Activation a) noexcept;
/// Throws ConfigError for an unknown tag.
Activation parse_activation(std::string_view tag);

/// Layer widths (input first) and one activation per weight layer.
struct NetSpec {
  std::vector<std::size_t> sizes;
  std::vector<Activation> activations;

  std::size_t layer_count() const noexcept { return activations.size(); }
  std::size_t parameter_count() const noexcept;
  /// Throws ConfigError on a malformed spec.
  void validate() const;
};

/// Scalar-in, scalar-out net whose hidden activations alternate sin, cos,
/// sin, ... (starting with `first`) and whose head is the identity.
NetSpec periodic_mlp(std::span<const std::size_t> hidden, Activation first = Activation::kSin);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multilayer perceptron with all parameters in one flat vector.
///
/// Layer l occupies [offset(l), offset(l+1)): its out x in weight matrix in
/// row-major order followed by its out biases.
class Net {
 public:
  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  static Net build(const NetSpec& spec, std::uint64_t seed);
  static Net from_parameters(const NetSpec& spec, std::vector<double> parameters,
                             std::uint64_t seed = 0);

  const NetSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t input_dim() const noexcept { return spec_.sizes.front(); }
  std::size_t output_dim() const noexcept { return spec_.sizes.back(); }
  std::size_t layer_count() const noexcept { return spec_.layer_count(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::size_t offset(std::size_t layer) const { return offsets_.at(layer); }
  Activation activation(std::size_t layer) const { return spec_.activations.at(layer); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  Eigen::Map<RowMatrix> weights(std::size_t layer);
  Eigen::Map<const RowMatrix> weights(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  /// Throws std::invalid_argument on a dimension mismatch and NonFiniteError
  /// if the output is not finite.
  std::vector<double> forward(std::span<const double> x) const;
  /// Columns of `inputs` are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

 private:
  Net(NetSpec spec, std::vector<double> params, std::uint64_t seed);

  NetSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

/// -log softmax(logits)[label] with max subtraction. Throws
/// std::out_of_range for a bad label.
double log_softmax_cross_entropy(std::span<const double> logits, std::size_t label);

/// Mean cross-entropy over the batch and its parameter gradient, written to
/// `grad` (overwritten). The last layer's pre-activation is read as logits.
double classifier_loss_and_grad(const Net& net, const Eigen::MatrixXd& inputs,
                                std::span<const std::uint8_t> labels, std::span<double> grad);

/// Batched second-order forward pass of a scalar-in, scalar-out net, with the
/// matching reverse sweep.
///
/// forward() propagates (x, 1, 0) through every layer so that value(), d1()
/// and d2() hold psi, dpsi/dx and d2psi/dx2 at each input. backward() takes
/// the adjoints of those three outputs and returns the parameter gradient.
class InputDerivativePass {
 public:
  void forward(const Net& net, std::span<const double> xs);

  const Eigen::RowVectorXd& value() const noexcept { return out0_; }
  const Eigen::RowVectorXd& d1() const noexcept { return out1_; }
  const Eigen::RowVectorXd& d2() const noexcept { return out2_; }

  /// Adds d(loss)/d(theta) into `grad`.
  void backward(const Net& net, const Eigen::RowVectorXd& adj_value,
                const Eigen::RowVectorXd& adj_d1, const Eigen::RowVectorXd& adj_d2,
                std::span<double> grad) const;

 private:
  struct LayerCache {
    Eigen::MatrixXd in0, in1, in2;  // layer inputs (value, d/dx, d2/dx2)
    Eigen::MatrixXd z1, z2;         // pre-activation derivatives
    Eigen::MatrixXd s1, s2, s3;     // activation derivatives at z0
  };
  std::vector<LayerCache> cache_;
  Eigen::RowVectorXd out0_, out1_, out2_;
};

void save_checkpoint(const Net& net, const std::filesystem::path& stem);
Net load_checkpoint(const std::filesystem::path& stem);

// ---------------------------------------------------------------------------
// Generic scalar evaluation. `P` is the parameter scalar and `S` the
// activation scalar, e.g. (double, double), (Var, Var) for parameter
// gradients on a tape, (double, Dual2<double>) for input derivatives and
// (Var, Dual2<Var>) for parameter gradients of input derivatives.

template <typename S>
S apply_activation(Activation a, const S& z) {
  using std::cos;
  using std::sin;
  using std::tanh;
  using ad::primal;
  switch (a) {
    case Activation::kIdentity:
    case Activation::kLogSoftmax: return z;
    case Activation::kSin: return sin(z);
    case Activation::kCos: return cos(z);
    case Activation::kTanh: return tanh(z);
    case Activation::kRelu: return primal(z) > 0.0 ? z : z * 0.0;
  }
  return z;
}

template <typename S>
void log_softmax_inplace(std::vector<S>& z) {
  using std::exp;
  using std::log;
  using ad::primal;
  double m = primal(z.front());
  for (const auto& v : z) m = std::max(m, primal(v));
  S sum = exp(z.front() - m);
  for (std::size_t i = 1; i < z.size(); ++i) sum = sum + exp(z[i] - m);
  const S lse = log(sum) + m;
  for (auto& v : z) v = v - lse;
}

template <typename P, typename S>
std::vector<S> forward_generic(const NetSpec& spec, std::span<const P> params, std::vector<S> x) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.sizes[l];
    const std::size_t out = spec.sizes[l + 1];
    const std::size_t bias_pos = pos + in * out;
    std::vector<S> y;
    y.reserve(out);
    for (std::size_t o = 0; o < out; ++o) {
      S acc = x[0] * params[pos + o * in];
      for (std::size_t i = 1; i < in; ++i) acc = acc + x[i] * params[pos + o * in + i];
      acc = acc + params[bias_pos + o];
      y.push_back(apply_activation(spec.activations[l], acc));
    }
    if (spec.activations[l] == Activation::kLogSoftmax) log_softmax_inplace(y);
    pos = bias_pos + out;
    x = std::move(y);
  }
  return x;
}

}  // namespace dlrs::nn
