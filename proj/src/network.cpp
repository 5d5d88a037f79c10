#include "dlrs/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <random>
#include <stdexcept>

#include "dlrs/error.hpp"

namespace dlrs::nn {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSin: return "sin";
    case Activation::kCos: return "cos";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLogSoftmax: return "log_softmax";
  }
  return "?";
}

Activation parse_activation(std::string_view tag) {
  for (auto a : {Activation::kIdentity, Activation::kSin, Activation::kCos, Activation::kTanh,
                 Activation::kRelu, Activation::kLogSoftmax}) {
    if (to_string(a) == tag) return a;
  }
  throw ConfigError("activation", "unknown activation tag '" + std::string(tag) + "'");
}

std::size_t NetSpec::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
  return n;
}

void NetSpec::validate() const {
  if (sizes.size() < 2) throw ConfigError("net", "need at least one layer");
  if (activations.size() != sizes.size() - 1) {
    throw ConfigError("net.activations", "expected " + std::to_string(sizes.size() - 1) +
                                             " activation tags, got " +
                                             std::to_string(activations.size()));
  }
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("net", "layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < activations.size(); ++l) {
    if (activations[l] == Activation::kLogSoftmax) {
      throw ConfigError("net.activations", "log_softmax is only allowed on the last layer");
    }
  }
}

NetSpec periodic_mlp(std::span<const std::size_t> hidden, Activation first) {
  NetSpec spec;
  spec.sizes.push_back(1);
  Activation current = first;
  for (auto h : hidden) {
    spec.sizes.push_back(h);
    spec.activations.push_back(current);
    current = current == Activation::kSin ? Activation::kCos : Activation::kSin;
  }
  spec.sizes.push_back(1);
  spec.activations.push_back(Activation::kIdentity);
  return spec;
}

Net::Net(NetSpec spec, std::vector<double> params, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != spec_.parameter_count()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(params_.size()) +
                                " entries, spec needs " +
                                std::to_string(spec_.parameter_count()));
  }
  std::size_t pos = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(pos);
    pos += spec_.sizes[l + 1] * (spec_.sizes[l] + 1);
  }
  offsets_.push_back(pos);
}

Net Net::build(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<double> params;
  params.reserve(spec.parameter_count());
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto in = spec.sizes[l];
    const auto out = spec.sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < in * out; ++k) params.push_back(dist(rng));
    params.insert(params.end(), out, 0.0);
  }
  return Net(spec, std::move(params), seed);
}

Net Net::from_parameters(const NetSpec& spec, std::vector<double> parameters, std::uint64_t seed) {
  return Net(spec, std::move(parameters), seed);
}

Eigen::Map<RowMatrix> Net::weights(std::size_t layer) {
  return {params_.data() + offsets_.at(layer), static_cast<Eigen::Index>(spec_.sizes[layer + 1]),
          static_cast<Eigen::Index>(spec_.sizes[layer])};
}

Eigen::Map<const RowMatrix> Net::weights(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer), static_cast<Eigen::Index>(spec_.sizes[layer + 1]),
          static_cast<Eigen::Index>(spec_.sizes[layer])};
}

Eigen::Map<Eigen::VectorXd> Net::bias(std::size_t layer) {
  const auto in = spec_.sizes[layer];
  const auto out = spec_.sizes[layer + 1];
  return {params_.data() + offsets_.at(layer) + in * out, static_cast<Eigen::Index>(out)};
}

Eigen::Map<const Eigen::VectorXd> Net::bias(std::size_t layer) const {
  const auto in = spec_.sizes[layer];
  const auto out = spec_.sizes[layer + 1];
  return {params_.data() + offsets_.at(layer) + in * out, static_cast<Eigen::Index>(out)};
}

namespace {

void activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity: break;
    case Activation::kSin: z = z.array().sin().matrix(); break;
    case Activation::kCos: z = z.array().cos().matrix(); break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kLogSoftmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double m = z.col(c).maxCoeff();
        const double lse = std::log((z.col(c).array() - m).exp().sum()) + m;
        z.col(c).array() -= lse;
      }
      break;
  }
}

// First derivative of the activation expressed through its input z and
// output y = act(z).
Eigen::ArrayXXd activation_slope(Activation a, const Eigen::ArrayXXd& z, const Eigen::ArrayXXd& y) {
  switch (a) {
    case Activation::kSin: return z.cos();
    case Activation::kCos: return -z.sin();
    case Activation::kTanh: return 1.0 - y.square();
    case Activation::kRelu: return (z > 0.0).cast<double>();
    case Activation::kIdentity:
    case Activation::kLogSoftmax: break;
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string(what) + ": non-finite value in network output");
}

}  // namespace

Eigen::MatrixXd Net::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw std::invalid_argument("forward: expected " + std::to_string(input_dim()) +
                                " input rows, got " + std::to_string(inputs.rows()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weights(l) * a;
    z.colwise() += bias(l);
    activate(activation(l), z);
    a = std::move(z);
  }
  require_finite(a, "forward");
  return a;
}

std::vector<double> Net::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("forward: expected input of length " + std::to_string(input_dim()) +
                                ", got " + std::to_string(x.size()));
  }
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd out = forward_batch(in);
  return {out.data(), out.data() + out.size()};
}

double log_softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(logits.size()) + ")");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  return std::log(sum) + m - logits[label];
}

double classifier_loss_and_grad(const Net& net, const Eigen::MatrixXd& inputs,
                                std::span<const std::uint8_t> labels, std::span<double> grad) {
  const auto n = inputs.cols();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw std::invalid_argument("classifier batch: inputs and labels disagree or are empty");
  }
  if (grad.size() != net.parameter_count()) throw std::invalid_argument("gradient size mismatch");

  const std::size_t layers = net.layer_count();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] = input of layer l
  std::vector<Eigen::MatrixXd> pre;
  acts.reserve(layers + 1);
  pre.reserve(layers);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = net.weights(l) * acts.back();
    z.colwise() += net.bias(l);
    pre.push_back(z);
    if (l + 1 < layers) activate(net.activation(l), z);
    acts.push_back(std::move(z));
  }

  // Softmax cross-entropy on the final pre-activation.
  Eigen::MatrixXd delta = pre.back();
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (labels[c] >= delta.rows()) throw std::out_of_range("label outside the classifier head");
    const double m = delta.col(c).maxCoeff();
    Eigen::ArrayXd e = (delta.col(c).array() - m).exp();
    const double sum = e.sum();
    loss += std::log(sum) + m - delta(labels[c], c);
    delta.col(c) = (e / sum).matrix();
    delta(labels[c], c) -= 1.0;
  }
  if (!std::isfinite(loss)) throw NonFiniteError("classifier loss is not finite");
  delta *= inv_n;

  for (std::size_t l = layers; l-- > 0;) {
    const auto in = net.spec().sizes[l];
    const auto out = net.spec().sizes[l + 1];
    Eigen::Map<RowMatrix> gw(grad.data() + net.offset(l), static_cast<Eigen::Index>(out),
                             static_cast<Eigen::Index>(in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.offset(l) + in * out,
                                   static_cast<Eigen::Index>(out));
    gw.noalias() = delta * acts[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = net.weights(l).transpose() * delta;
    const Eigen::ArrayXXd slope = activation_slope(net.activation(l - 1), pre[l - 1].array(),
                                                   acts[l].array());
    delta = (back.array() * slope).matrix();
  }
  return loss * inv_n;
}

namespace {

// Derivatives 1..3 of the activation at z.
void activation_derivatives(Activation a, const Eigen::ArrayXXd& z, Eigen::MatrixXd& value,
                            Eigen::MatrixXd& s1, Eigen::MatrixXd& s2, Eigen::MatrixXd& s3) {
  switch (a) {
    case Activation::kSin: {
      const Eigen::ArrayXXd s = z.sin();
      const Eigen::ArrayXXd c = z.cos();
      value = s.matrix();
      s1 = c.matrix();
      s2 = (-s).matrix();
      s3 = (-c).matrix();
      return;
    }
    case Activation::kCos: {
      const Eigen::ArrayXXd s = z.sin();
      const Eigen::ArrayXXd c = z.cos();
      value = c.matrix();
      s1 = (-s).matrix();
      s2 = (-c).matrix();
      s3 = s.matrix();
      return;
    }
    case Activation::kTanh: {
      const Eigen::ArrayXXd t = z.tanh();
      const Eigen::ArrayXXd dt = 1.0 - t.square();
      value = t.matrix();
      s1 = dt.matrix();
      s2 = (-2.0 * t * dt).matrix();
      s3 = (dt * (6.0 * t.square() - 2.0)).matrix();
      return;
    }
    case Activation::kRelu: {
      value = z.max(0.0).matrix();
      s1 = (z > 0.0).cast<double>().matrix();
      s2.setZero(z.rows(), z.cols());
      s3.setZero(z.rows(), z.cols());
      return;
    }
    case Activation::kIdentity:
    case Activation::kLogSoftmax:
      value = z.matrix();
      s1.setOnes(z.rows(), z.cols());
      s2.setZero(z.rows(), z.cols());
      s3.setZero(z.rows(), z.cols());
      return;
  }
}

}  // namespace

void InputDerivativePass::forward(const Net& net, std::span<const double> xs) {
  if (net.input_dim() != 1 || net.output_dim() != 1) {
    throw std::invalid_argument("input-derivative pass needs a scalar-in, scalar-out net");
  }
  if (net.activation(net.layer_count() - 1) == Activation::kLogSoftmax) {
    throw std::invalid_argument("input-derivative pass does not support a log_softmax head");
  }
  const auto n = static_cast<Eigen::Index>(xs.size());
  cache_.resize(net.layer_count());

  Eigen::MatrixXd a0 = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), n);
  Eigen::MatrixXd a1 = Eigen::MatrixXd::Ones(1, n);
  Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(1, n);

  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    LayerCache& c = cache_[l];
    const auto w = net.weights(l);
    Eigen::MatrixXd z0 = w * a0;
    z0.colwise() += net.bias(l);
    c.z1.noalias() = w * a1;
    c.z2.noalias() = w * a2;
    c.in0 = std::move(a0);
    c.in1 = std::move(a1);
    c.in2 = std::move(a2);

    activation_derivatives(net.activation(l), z0.array(), a0, c.s1, c.s2, c.s3);
    a1 = c.s1.cwiseProduct(c.z1);
    a2 = (c.s2.array() * c.z1.array().square() + c.s1.array() * c.z2.array()).matrix();
  }
  out0_ = a0.row(0);
  out1_ = a1.row(0);
  out2_ = a2.row(0);
  if (!out0_.allFinite() || !out1_.allFinite() || !out2_.allFinite()) {
    throw NonFiniteError("input-derivative pass: non-finite network output");
  }
}

void InputDerivativePass::backward(const Net& net, const Eigen::RowVectorXd& adj_value,
                                   const Eigen::RowVectorXd& adj_d1,
                                   const Eigen::RowVectorXd& adj_d2, std::span<double> grad) const {
  if (grad.size() != net.parameter_count()) throw std::invalid_argument("gradient size mismatch");
  if (cache_.size() != net.layer_count()) throw std::logic_error("backward() before forward()");

  Eigen::MatrixXd g0 = adj_value;
  Eigen::MatrixXd g1 = adj_d1;
  Eigen::MatrixXd g2 = adj_d2;

  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const LayerCache& c = cache_[l];
    const auto s1 = c.s1.array();
    const auto s2 = c.s2.array();
    const auto z1 = c.z1.array();

    const Eigen::MatrixXd dz0 =
        (g0.array() * s1 + g1.array() * s2 * z1 +
         g2.array() * (c.s3.array() * z1.square() + s2 * c.z2.array()))
            .matrix();
    const Eigen::MatrixXd dz1 = (g1.array() * s1 + 2.0 * g2.array() * s2 * z1).matrix();
    const Eigen::MatrixXd dz2 = (g2.array() * s1).matrix();

    const auto in = net.spec().sizes[l];
    const auto out = net.spec().sizes[l + 1];
    Eigen::Map<RowMatrix> gw(grad.data() + net.offset(l), static_cast<Eigen::Index>(out),
                             static_cast<Eigen::Index>(in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.offset(l) + in * out,
                                   static_cast<Eigen::Index>(out));
    gw.noalias() += dz0 * c.in0.transpose();
    gw.noalias() += dz1 * c.in1.transpose();
    if (l > 0) gw.noalias() += dz2 * c.in2.transpose();  // first-layer in2 is zero
    gb += dz0.rowwise().sum();

    if (l == 0) break;
    const auto w = net.weights(l);
    g0.noalias() = w.transpose() * dz0;
    g1.noalias() = w.transpose() * dz1;
    g2.noalias() = w.transpose() * dz2;
  }
}

void save_checkpoint(const Net& net, const std::filesystem::path& stem) {
  nlohmann::ordered_json header;
  header["format"] = "dlrs-checkpoint-v1";
  header["layer_sizes"] = net.spec().sizes;
  std::vector<std::string> tags;
  for (auto a : net.spec().activations) tags.emplace_back(to_string(a));
  header["activations"] = tags;
  header["seed"] = net.seed();
  header["init"] = "glorot_uniform";
  header["parameter_count"] = net.parameter_count();
  header["encoding"] = "float64-le";

  auto json_path = stem;
  json_path += ".json";
  auto bin_path = stem;
  bin_path += ".bin";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << header.dump(2) << '\n';

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  for (double v : net.parameters()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    bin.write(bytes, 8);
  }
  if (!bin) throw std::runtime_error("failed writing " + bin_path.string());
}

Net load_checkpoint(const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  auto bin_path = stem;
  bin_path += ".bin";
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot read " + json_path.string());
  const auto header = nlohmann::json::parse(js);

  NetSpec spec;
  spec.sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
  for (const auto& tag : header.at("activations")) {
    spec.activations.push_back(parse_activation(tag.get<std::string>()));
  }
  const auto count = header.at("parameter_count").get<std::size_t>();

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path.string());
  std::vector<double> params(count);
  for (auto& v : params) {
    unsigned char bytes[8];
    if (!bin.read(reinterpret_cast<char*>(bytes), 8)) {
      throw std::runtime_error("checkpoint " + bin_path.string() + " is truncated");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return Net::from_parameters(spec, std::move(params), header.at("seed").get<std::uint64_t>());
}

}  // namespace dlrs::nn
