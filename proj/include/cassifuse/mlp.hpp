#ifndef CASSIFUSE_MLP_HPP
#define CASSIFUSE_MLP_HPP

// Multilayer perceptron pixel classifier: ReLU hidden layers, softmax output,
// categorical cross-entropy trained by mini-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;     // outputs

  double& w(std::size_t o, std::size_t i) { return weights[o * inputs + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * inputs + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpNetwork {
  std::vector<DenseLayer> layers;
  // Applied to every input before the first layer: (s - offset) * scale.
  std::vector<double> input_offset;
  std::vector<double> input_scale;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().inputs; }
  std::size_t class_count() const { return layers.empty() ? 0 : layers.back().outputs; }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> s;
    if (layers.empty()) return s;
    s.push_back(layers.front().inputs);
    for (const auto& l : layers) s.push_back(l.outputs);
    return s;
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.weights.size() + l.bias.size();
    return c;
  }

  void validate() const {
    if (layers.empty()) throw configuration_error("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs) {
        throw dimension_error("layer " + std::to_string(i + 1) + " parameter shapes are inconsistent");
      }
      if (i > 0 && layers[i - 1].outputs != l.inputs) {
        throw dimension_error("layer " + std::to_string(i + 1) + " does not chain to its predecessor");
      }
      for (double v : l.weights) {
        if (!std::isfinite(v)) throw domain_error("non-finite network weight");
      }
      for (double v : l.bias) {
        if (!std::isfinite(v)) throw domain_error("non-finite network bias");
      }
    }
    if (input_offset.size() != input_dim() || input_scale.size() != input_dim()) {
      throw dimension_error("input standardization does not match the input layer");
    }
  }

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;
};

// Ten hidden layers of ten neurons.
inline std::vector<std::size_t> default_hidden_layers() { return std::vector<std::size_t>(10, 10); }

// Weights ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), biases zero.
inline MlpNetwork init_network(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                               std::size_t class_count, std::uint64_t seed) {
  if (input_dim == 0 || class_count == 0) throw configuration_error("network sizes must be positive");
  for (auto h : hidden) {
    if (h == 0) throw configuration_error("hidden layer widths must be positive");
  }
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(class_count);

  Rng rng(seed);
  MlpNetwork net;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    l.inputs = sizes[i];
    l.outputs = sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.inputs));
    l.weights.resize(l.inputs * l.outputs);
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
    l.bias.assign(l.outputs, 0.0);
    net.layers.push_back(std::move(l));
  }
  net.input_offset.assign(input_dim, 0.0);
  net.input_scale.assign(input_dim, 1.0);
  return net;
}

// Pre-activations and activations of every layer for one input.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // per layer
  std::vector<std::vector<double>> post;  // post[0] is the standardized input
};

inline void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& e : v) {
    e = std::exp(e - mx);
    sum += e;
  }
  for (double& e : v) e /= sum;
}

inline ForwardTrace forward_trace(const MlpNetwork& net, std::span<const double> sample) {
  if (sample.size() != net.input_dim()) {
    throw dimension_error("sample has " + std::to_string(sample.size()) + " features, network expects " +
                          std::to_string(net.input_dim()));
  }
  ForwardTrace t;
  std::vector<double> a(sample.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (sample[i] - net.input_offset[i]) * net.input_scale[i];
  t.post.push_back(a);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    std::vector<double> z(l.outputs);
    for (std::size_t o = 0; o < l.outputs; ++o) {
      double acc = l.bias[o];
      const double* row = l.weights.data() + o * l.inputs;
      for (std::size_t i = 0; i < l.inputs; ++i) acc += row[i] * t.post.back()[i];
      z[o] = acc;
    }
    std::vector<double> act = z;
    if (li + 1 < net.layers.size()) {
      for (double& v : act) v = std::max(v, 0.0);
    } else {
      softmax_inplace(act);
    }
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(act));
  }
  return t;
}

// Class probabilities.
inline std::vector<double> forward(const MlpNetwork& net, std::span<const double> sample) {
  return std::move(forward_trace(net, sample).post.back());
}

// Probability floor inside the logarithm of the loss.
inline constexpr double kProbabilityFloor = 1e-12;

struct Gradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradient zeros_like(const MlpNetwork& net) {
    Gradient g;
    for (const auto& l : net.layers) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
  }
};

struct LossGradient {
  double loss = 0.0;  // sum over samples of -log p_label
  Gradient gradient;
};

// Cross-entropy summed over the samples and its gradient by backpropagation.
// `samples` is row-major (count x input_dim); labels are 0-based.
inline LossGradient loss_and_gradient(const MlpNetwork& net, std::span<const double> samples,
                                      std::span<const std::uint32_t> labels) {
  const std::size_t dim = net.input_dim();
  if (samples.size() != labels.size() * dim) throw dimension_error("samples/labels size mismatch");
  LossGradient out;
  out.gradient = Gradient::zeros_like(net);
  const std::size_t depth = net.layers.size();
  std::vector<double> delta, prev;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] >= net.class_count()) throw dimension_error("label outside the output layer");
    const auto t = forward_trace(net, samples.subspan(s * dim, dim));
    const auto& p = t.post.back();
    out.loss -= std::log(std::max(p[labels[s]], kProbabilityFloor));
    delta = p;
    delta[labels[s]] -= 1.0;
    for (std::size_t li = depth; li-- > 0;) {
      const auto& l = net.layers[li];
      const auto& input = t.post[li];
      auto& gw = out.gradient.weights[li];
      auto& gb = out.gradient.bias[li];
      for (std::size_t o = 0; o < l.outputs; ++o) {
        gb[o] += delta[o];
        double* row = gw.data() + o * l.inputs;
        for (std::size_t i = 0; i < l.inputs; ++i) row[i] += delta[o] * input[i];
      }
      if (li == 0) break;
      prev.assign(l.inputs, 0.0);
      for (std::size_t o = 0; o < l.outputs; ++o) {
        const double* row = l.weights.data() + o * l.inputs;
        for (std::size_t i = 0; i < l.inputs; ++i) prev[i] += row[i] * delta[o];
      }
      const auto& z = t.pre[li - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (z[i] <= 0.0) prev[i] = 0.0;
      }
      delta.swap(prev);
    }
  }
  return out;
}

struct TrainOptions {
  std::size_t epochs = 300;
  double learning_rate = 1e-2;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool standardize = true;

  void validate() const {
    if (epochs == 0) throw configuration_error("epochs must be positive");
    if (!(learning_rate >= 0.0)) throw configuration_error("learning_rate must be >= 0");
    if (batch_size == 0) throw configuration_error("batch_size must be positive");
  }
};

struct TrainResult {
  MlpNetwork network;
  std::vector<double> loss_trace;  // mean cross-entropy per sample, one entry per epoch
};

// Per-feature mean and inverse standard deviation of row-major samples.
inline void fit_standardization(MlpNetwork& net, std::span<const double> samples) {
  const std::size_t dim = net.input_dim();
  const std::size_t count = samples.size() / dim;
  net.input_offset.assign(dim, 0.0);
  net.input_scale.assign(dim, 1.0);
  if (count == 0) return;
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < dim; ++i) net.input_offset[i] += samples[s * dim + i];
  }
  for (double& m : net.input_offset) m /= static_cast<double>(count);
  std::vector<double> var(dim, 0.0);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = samples[s * dim + i] - net.input_offset[i];
      var[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(count));
    net.input_scale[i] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
}

inline TrainResult train(MlpNetwork net, std::span<const double> samples,
                         std::span<const std::uint32_t> labels, const TrainOptions& opt) {
  opt.validate();
  net.validate();
  const std::size_t dim = net.input_dim();
  if (samples.size() != labels.size() * dim) throw dimension_error("samples/labels size mismatch");
  if (labels.empty()) throw data_error("no training samples");
  if (opt.standardize) fit_standardization(net, samples);

  Rng rng(opt.seed);
  TrainResult out;
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> batch_x;
  std::vector<std::uint32_t> batch_y;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t b = start; b < stop; ++b) {
        const auto s = samples.subspan(order[b] * dim, dim);
        batch_x.insert(batch_x.end(), s.begin(), s.end());
        batch_y.push_back(labels[order[b]]);
      }
      const auto lg = loss_and_gradient(net, batch_x, batch_y);
      if (!std::isfinite(lg.loss)) {
        throw divergence_error("training loss became non-finite in epoch " + std::to_string(epoch + 1),
                               epoch + 1);
      }
      epoch_loss += lg.loss;
      const double step = opt.learning_rate / static_cast<double>(stop - start);
      for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] -= step * lg.gradient.weights[li][i];
        for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= step * lg.gradient.bias[li][i];
      }
    }
    out.loss_trace.push_back(epoch_loss / static_cast<double>(labels.size()));
  }
  out.network = std::move(net);
  return out;
}

// Index of the largest probability; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

// Feature vector of pixel (m, n).
inline std::vector<double> pixel_features(const SpectralCube& features, std::size_t m, std::size_t n) {
  std::vector<double> v(features.bands());
  for (std::size_t b = 0; b < v.size(); ++b) v[b] = features(m, n, b);
  return v;
}

// Labels 1..C for every pixel.
inline LabelMap predict_map(const MlpNetwork& net, const SpectralCube& features) {
  if (features.bands() != net.input_dim()) {
    throw dimension_error("feature cube has " + std::to_string(features.bands()) +
                          " bands, network expects " + std::to_string(net.input_dim()));
  }
  std::vector<std::uint32_t> labels(features.pixels());
  for (std::size_t n = 0; n < features.cols(); ++n) {
    for (std::size_t m = 0; m < features.rows(); ++m) {
      const auto p = forward(net, pixel_features(features, m, n));
      labels[m + n * features.rows()] = static_cast<std::uint32_t>(argmax(p) + 1);
    }
  }
  return LabelMap(features.rows(), features.cols(), std::move(labels), net.class_count());
}

}  // namespace cassifuse

#endif  // CASSIFUSE_MLP_HPP
