#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/flsim/data.hpp"

namespace nrqfl::flsim {

/// Multinomial logistic regression. Weights are laid out class-major: row c
/// holds the feature weights of class c followed by its bias, so parameter
/// (c, k) lives at c * (features + 1) + k.
struct ModelShape {
  std::size_t features = 0;
  std::size_t classes = 0;

  std::size_t row_size() const noexcept { return features + 1; }
  std::size_t parameters() const noexcept { return row_size() * classes; }
};

struct GlobalModel {
  std::vector<double> weights;
  std::size_t round = 0;
};

struct ClientState {
  std::size_t id = 0;
  const Dataset* data = nullptr;
  std::vector<double> weights;
  double learning_rate = 0.1;
  std::size_t local_epochs = 5;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_shape(std::span<const double> w, const ModelShape& shape, std::size_t feature_dim) {
  if (w.size() != shape.parameters())
    throw std::invalid_argument("model: weight vector has " + std::to_string(w.size()) + " entries, expected " +
                                std::to_string(shape.parameters()));
  if (feature_dim != shape.features) throw std::invalid_argument("model: dataset feature dimension mismatch");
}

inline void logits(std::span<const double> w, const ModelShape& shape, std::span<const double> x,
                   std::vector<double>& out) {
  out.assign(shape.classes, 0.0);
  for (std::size_t c = 0; c < shape.classes; ++c) {
    const double* row = w.data() + c * shape.row_size();
    double z = row[shape.features];
    for (std::size_t k = 0; k < shape.features; ++k) z += row[k] * x[k];
    out[c] = z;
  }
}

// In-place softmax; returns log-sum-exp.
inline double softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : z) v /= s;
  return m + std::log(s);
}

}  // namespace detail

/// Mean softmax cross-entropy.
inline double loss(std::span<const double> w, const ModelShape& shape, const Dataset& data) {
  detail::require_shape(w, shape, data.feature_dim);
  if (data.size() == 0) throw std::invalid_argument("loss: empty dataset");
  std::vector<double> z;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::logits(w, shape, data.row(i), z);
    const double y_logit = z[static_cast<std::size_t>(data.labels[i])];
    total += detail::softmax(z) - y_logit;
  }
  return total / static_cast<double>(data.size());
}

/// Gradient of `loss` with respect to the weights.
inline std::vector<double> gradient(std::span<const double> w, const ModelShape& shape, const Dataset& data) {
  detail::require_shape(w, shape, data.feature_dim);
  if (data.size() == 0) throw std::invalid_argument("gradient: empty dataset");
  std::vector<double> g(shape.parameters(), 0.0);
  std::vector<double> p;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    detail::logits(w, shape, x, p);
    detail::softmax(p);
    p[static_cast<std::size_t>(data.labels[i])] -= 1.0;
    for (std::size_t c = 0; c < shape.classes; ++c) {
      double* row = g.data() + c * shape.row_size();
      for (std::size_t k = 0; k < shape.features; ++k) row[k] += p[c] * x[k];
      row[shape.features] += p[c];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (auto& v : g) v *= inv_n;
  return g;
}

/// Full-batch gradient descent from the global weights.
inline std::vector<double> local_train(const Dataset& data, const ModelShape& shape,
                                       std::span<const double> global, std::size_t epochs, double lr) {
  detail::require_shape(global, shape, data.feature_dim);
  std::vector<double> w(global.begin(), global.end());
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto g = gradient(w, shape, data);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
  }
  if (epochs > 0) {
    const double l = loss(w, shape, data);
    if (!std::isfinite(l))
      throw TrainingDiverged("local_train: non-finite loss after " + std::to_string(epochs) +
                             " steps (learning rate " + std::to_string(lr) + " too large?)");
  }
  return w;
}

inline std::vector<double> local_train(const ClientState& client, const ModelShape& shape,
                                       const GlobalModel& global) {
  if (client.data == nullptr) throw std::invalid_argument("local_train: client has no data");
  return local_train(*client.data, shape, global.weights, client.local_epochs, client.learning_rate);
}

/// Dataset-size-weighted mean.
inline std::vector<double> fedavg_aggregate(std::span<const std::vector<double>> vectors,
                                            std::span<const double> sizes) {
  if (vectors.empty()) throw std::invalid_argument("fedavg_aggregate: no vectors");
  if (sizes.size() != vectors.size()) throw std::invalid_argument("fedavg_aggregate: one size per vector required");
  const std::size_t p = vectors.front().size();
  double total = 0.0;
  for (double s : sizes) {
    if (!(s > 0.0)) throw std::invalid_argument("fedavg_aggregate: sizes must be positive");
    total += s;
  }
  std::vector<double> out(p, 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != p) throw std::invalid_argument("fedavg_aggregate: length mismatch");
    const double w = sizes[i] / total;
    for (std::size_t j = 0; j < p; ++j) out[j] += w * vectors[i][j];
  }
  return out;
}

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Argmax predictions; macro F1 averages per-class F1 over all classes, a
/// class with no true and no predicted samples scoring 0.
inline Metrics evaluate(std::span<const double> w, const ModelShape& shape, const Dataset& test) {
  detail::require_shape(w, shape, test.feature_dim);
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  std::vector<std::size_t> tp(shape.classes, 0), fp(shape.classes, 0), fn(shape.classes, 0);
  std::size_t correct = 0;
  std::vector<double> z;
  for (std::size_t i = 0; i < test.size(); ++i) {
    detail::logits(w, shape, test.row(i), z);
    const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const auto truth = static_cast<std::size_t>(test.labels[i]);
    if (pred == truth) {
      ++correct;
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < shape.classes; ++c) {
    const double denom = 2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  m.macro_f1 = f1_sum / static_cast<double>(shape.classes);
  return m;
}

}  // namespace nrqfl::flsim
