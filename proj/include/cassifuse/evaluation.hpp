#ifndef CASSIFUSE_EVALUATION_HPP
#define CASSIFUSE_EVALUATION_HPP

// Stratified train/test splitting, accuracy metrics, and training the
// classifier on a split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/mlp.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

struct LabelledPixel {
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint32_t label = 0;  // 1..C

  friend bool operator==(const LabelledPixel&, const LabelledPixel&) = default;
};

struct TrainTestSplit {
  std::vector<LabelledPixel> train;
  std::vector<LabelledPixel> test;
  std::vector<std::size_t> train_per_class;  // index c-1
  std::vector<std::size_t> test_per_class;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t class_count = 0;
  double rate = 0.0;
  std::uint64_t seed = 0;
};

// Per class, round(rate * size) pixels (at least one, leaving at least one for
// testing) are drawn at random for training; the rest are test pixels.
inline TrainTestSplit split_train_test(const LabelMap& gt, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate < 1.0)) throw configuration_error("train rate must lie in (0, 1)");
  const std::size_t c_count = gt.class_count();
  std::vector<std::vector<LabelledPixel>> by_class(c_count);
  for (std::size_t n = 0; n < gt.cols(); ++n) {
    for (std::size_t m = 0; m < gt.rows(); ++m) {
      const auto l = gt(m, n);
      if (l != 0) by_class[l - 1].push_back({m, n, l});
    }
  }
  TrainTestSplit s;
  s.rows = gt.rows();
  s.cols = gt.cols();
  s.class_count = c_count;
  s.rate = rate;
  s.seed = seed;
  s.train_per_class.assign(c_count, 0);
  s.test_per_class.assign(c_count, 0);
  Rng rng(seed);
  for (std::size_t c = 0; c < c_count; ++c) {
    auto& px = by_class[c];
    if (px.empty()) continue;
    if (px.size() < 2) {
      throw data_error("class " + std::to_string(c + 1) + " has " + std::to_string(px.size()) +
                       " labelled pixel; at least 2 are needed to split");
    }
    rng.shuffle(px);
    auto n_train = static_cast<std::size_t>(std::llround(rate * static_cast<double>(px.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, px.size() - 1);
    s.train.insert(s.train.end(), px.begin(), px.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), px.begin() + static_cast<std::ptrdiff_t>(n_train), px.end());
    s.train_per_class[c] = n_train;
    s.test_per_class[c] = px.size() - n_train;
  }
  return s;
}

// Label map holding only the given pixels.
inline LabelMap label_map_of(const std::vector<LabelledPixel>& pixels, std::size_t rows,
                             std::size_t cols, std::size_t class_count) {
  std::vector<std::uint32_t> labels(rows * cols, 0);
  for (const auto& p : pixels) labels[p.m + p.n * rows] = p.label;
  return LabelMap(rows, cols, std::move(labels), class_count);
}

struct ClassificationMetrics {
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class;      // accuracy of class c at c-1; NaN without support
  std::vector<std::size_t> support;   // labelled pixels per class
  std::vector<std::size_t> confusion;  // C x C row-major, rows = truth, cols = prediction
  std::size_t class_count = 0;
  std::size_t total = 0;

  std::size_t at(std::size_t truth, std::size_t pred) const {
    return confusion[truth * class_count + pred];
  }
};

// Metrics from a confusion matrix (rows = truth).
inline ClassificationMetrics metrics_from_confusion(std::vector<std::size_t> confusion,
                                                    std::size_t class_count) {
  if (confusion.size() != class_count * class_count) throw dimension_error("confusion matrix shape");
  ClassificationMetrics r;
  r.class_count = class_count;
  r.confusion = std::move(confusion);
  r.per_class.assign(class_count, std::nan(""));
  r.support.assign(class_count, 0);
  std::vector<double> col_sum(class_count, 0.0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < class_count; ++t) {
    for (std::size_t p = 0; p < class_count; ++p) {
      const auto v = r.at(t, p);
      r.support[t] += v;
      col_sum[p] += static_cast<double>(v);
      if (t == p) correct += v;
    }
    r.total += r.support[t];
  }
  if (r.total == 0) throw domain_error("no labelled pixels to evaluate");
  const double total = static_cast<double>(r.total);
  r.overall_accuracy = static_cast<double>(correct) / total;
  double aa = 0.0, chance = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    chance += static_cast<double>(r.support[c]) * col_sum[c];
    if (r.support[c] == 0) continue;
    r.per_class[c] = static_cast<double>(r.at(c, c)) / static_cast<double>(r.support[c]);
    aa += r.per_class[c];
    ++present;
  }
  r.average_accuracy = aa / static_cast<double>(present);
  const double pe = chance / (total * total);
  // With p_e = 1 all pixels share one class and one prediction; agreement is then total.
  r.kappa = pe < 1.0 ? (r.overall_accuracy - pe) / (1.0 - pe) : 1.0;
  return r;
}

// Agreement of `pred` with `gt` over the pixels labelled in `gt`.
inline ClassificationMetrics metrics(const LabelMap& pred, const LabelMap& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw dimension_error("prediction and ground-truth maps differ in size");
  }
  const std::size_t c_count = gt.class_count();
  std::vector<std::size_t> confusion(c_count * c_count, 0);
  for (std::size_t i = 0; i < gt.labels().size(); ++i) {
    const auto t = gt.labels()[i];
    if (t == 0) continue;
    const auto p = pred.labels()[i];
    if (p == 0 || p > c_count) {
      throw data_error("prediction " + std::to_string(p) + " outside classes 1.." +
                       std::to_string(c_count));
    }
    ++confusion[(t - 1) * c_count + (p - 1)];
  }
  return metrics_from_confusion(std::move(confusion), c_count);
}

// Gathers feature rows (row-major) and 0-based labels for a set of pixels.
inline void gather_samples(const SpectralCube& features, const std::vector<LabelledPixel>& pixels,
                           std::vector<double>& samples, std::vector<std::uint32_t>& labels) {
  samples.clear();
  labels.clear();
  samples.reserve(pixels.size() * features.bands());
  for (const auto& p : pixels) {
    if (p.m >= features.rows() || p.n >= features.cols()) {
      throw dimension_error("split pixel outside the feature cube");
    }
    for (std::size_t b = 0; b < features.bands(); ++b) samples.push_back(features(p.m, p.n, b));
    labels.push_back(p.label - 1);
  }
}

inline TrainResult train(MlpNetwork net, const TrainTestSplit& split, const SpectralCube& features,
                         const TrainOptions& opt) {
  if (split.rows != features.rows() || split.cols != features.cols()) {
    throw dimension_error("split grid does not match the feature cube");
  }
  std::vector<double> x;
  std::vector<std::uint32_t> y;
  gather_samples(features, split.train, x, y);
  return train(std::move(net), x, y, opt);
}

}  // namespace cassifuse

#endif  // CASSIFUSE_EVALUATION_HPP
