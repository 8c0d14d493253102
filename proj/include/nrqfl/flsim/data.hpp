#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/rng.hpp"

namespace nrqfl::flsim {

/// Row-major feature matrix with integer labels.
struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * feature_dim, feature_dim);
  }
  std::vector<std::size_t> label_histogram(std::size_t classes) const {
    std::vector<std::size_t> h(classes, 0);
    for (int y : labels) ++h[static_cast<std::size_t>(y)];
    return h;
  }
};

struct PartitionConfig {
  std::size_t n_clients = 5;
  std::size_t classes = 3;
  std::size_t samples_per_client = 200;
  std::size_t feature_dim = 4;
  /// 0 = near-IID, 1 = strongly label-skewed.
  double skew = 0.7;
  /// Standard deviation of the class means around the origin; features have
  /// unit noise around their class mean.
  double class_separation = 1.5;
  std::size_t test_samples_per_class = 200;
  std::uint64_t seed = 1;

  /// Dirichlet concentration: 10 at skew 0 down to 0.1 at skew 1.
  double dirichlet_alpha() const { return (1.0 - skew) * 10.0 + skew * 0.1; }

  void validate() const {
    if (n_clients < 2) throw std::invalid_argument("PartitionConfig: n_clients must be >= 2");
    if (classes < 2) throw std::invalid_argument("PartitionConfig: classes must be >= 2");
    if (samples_per_client == 0) throw std::invalid_argument("PartitionConfig: samples_per_client must be >= 1");
    if (feature_dim < 2 || feature_dim > 8) throw std::invalid_argument("PartitionConfig: feature_dim must be in [2, 8]");
    if (!(skew >= 0.0 && skew <= 1.0)) throw std::invalid_argument("PartitionConfig: skew must be in [0, 1]");
    if (!(class_separation > 0.0)) throw std::invalid_argument("PartitionConfig: class_separation must be > 0");
    if (test_samples_per_class == 0) throw std::invalid_argument("PartitionConfig: test set must be non-empty");
  }
};

struct DataPartition {
  std::vector<Dataset> clients;
  Dataset test;
  std::size_t classes = 0;
  double skew = 0.0;
  double alpha = 0.0;
  std::vector<std::vector<double>> class_means;
  std::vector<std::vector<double>> label_proportions;  // Dirichlet draw per client
};

namespace detail {

inline std::vector<double> dirichlet(std::size_t k, double alpha, RngStream& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> x(k);
  double sum = 0.0;
  for (auto& v : x) {
    v = gamma(rng.engine());
    sum += v;
  }
  if (!(sum > 0.0)) {
    // All draws underflowed (tiny alpha): the limit is a point mass.
    std::fill(x.begin(), x.end(), 0.0);
    x[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng.engine())] = 1.0;
    return x;
  }
  for (auto& v : x) v /= sum;
  return x;
}

// Largest-remainder rounding of proportions to integer counts summing to n.
inline std::vector<std::size_t> apportion(std::span<const double> p, std::size_t n) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double exact = p[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

inline void append_sample(Dataset& d, std::span<const double> mean, int label, RngStream& rng) {
  for (double m : mean) d.features.push_back(m + rng.normal());
  d.labels.push_back(label);
}

}  // namespace detail

/// Gaussian-mixture classification data split across clients with Dirichlet
/// label skew, plus a balanced held-out test set. Deterministic per seed.
inline DataPartition make_partition(const PartitionConfig& cfg) {
  cfg.validate();
  RngStream rng(derive_seed(cfg.seed, {tag(StreamTag::kPartition)}));

  DataPartition part;
  part.classes = cfg.classes;
  part.skew = cfg.skew;
  part.alpha = cfg.dirichlet_alpha();
  part.class_means.assign(cfg.classes, std::vector<double>(cfg.feature_dim));
  for (auto& mean : part.class_means)
    for (auto& v : mean) v = rng.normal(0.0, cfg.class_separation);

  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    auto props = detail::dirichlet(cfg.classes, part.alpha, rng);
    const auto counts = detail::apportion(props, cfg.samples_per_client);
    Dataset d;
    d.feature_dim = cfg.feature_dim;
    for (std::size_t c = 0; c < cfg.classes; ++c)
      for (std::size_t s = 0; s < counts[c]; ++s)
        detail::append_sample(d, part.class_means[c], static_cast<int>(c), rng);
    part.clients.push_back(std::move(d));
    part.label_proportions.push_back(std::move(props));
  }

  part.test.feature_dim = cfg.feature_dim;
  for (std::size_t c = 0; c < cfg.classes; ++c)
    for (std::size_t s = 0; s < cfg.test_samples_per_class; ++s)
      detail::append_sample(part.test, part.class_means[c], static_cast<int>(c), rng);
  return part;
}

}  // namespace nrqfl::flsim
