#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "nrqfl/qcore.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::qselect {

using qcore::NoiseModel;

/// Anything that yields one bit per call and counts what it has yielded.
template <typename S>
concept BitSource = requires(S s) {
  { s.next() } -> std::convertible_to<bool>;
  { s.consumed() } -> std::convertible_to<std::uint64_t>;
};

/// Single-qubit entropy circuit: Ry(pi/2)|0> (H up to a phase) followed by the
/// per-gate noise channels, measured once per bit with readout error.
class QuantumEntropySource {
 public:
  QuantumEntropySource(const NoiseModel& noise, RngStream rng) : rng_(std::move(rng)) {
    noise.validate();
    auto state = qcore::apply_unitary(qcore::DensityMatrix::ground(1), qcore::ry(std::numbers::pi / 2.0), 0);
    for (const auto& ch : noise.gate_channels()) state = qcore::apply_channel(state, ch, 0);
    p_one_ = qcore::observed_probability_one(state.probability_one(0), noise.readout_flip);
  }

  bool next() {
    ++consumed_;
    return rng_.bernoulli(p_one_);
  }
  std::uint64_t consumed() const noexcept { return consumed_; }
  double probability_one() const noexcept { return p_one_; }

 private:
  RngStream rng_;
  double p_one_ = 0.5;
  std::uint64_t consumed_ = 0;
};

/// Von Neumann extractor: reads raw bit pairs, emits 0 for (0,1), 1 for
/// (1,0), and discards equal pairs. Output is unbiased for any i.i.d. input
/// with 0 < P(1) < 1.
template <BitSource Raw>
class VonNeumannExtractor {
 public:
  explicit VonNeumannExtractor(Raw raw) : raw_(std::move(raw)) {}

  bool next() {
    for (;;) {
      const bool a = raw_.next();
      const bool b = raw_.next();
      if (a != b) {
        ++consumed_;
        return a;
      }
      if (raw_.consumed() > kMaxRawBits)
        throw std::runtime_error("VonNeumannExtractor: entropy source appears constant");
    }
  }
  std::uint64_t consumed() const noexcept { return consumed_; }
  std::uint64_t raw_consumed() const noexcept { return raw_.consumed(); }
  const Raw& raw() const noexcept { return raw_; }

 private:
  static constexpr std::uint64_t kMaxRawBits = std::uint64_t{1} << 40;
  Raw raw_;
  std::uint64_t consumed_ = 0;
};

/// Replays a fixed bit sequence.
class BitSequence {
 public:
  explicit BitSequence(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  bool next() {
    if (pos_ >= bits_.size()) throw std::out_of_range("BitSequence: exhausted");
    return bits_[pos_++] != 0;
  }
  std::uint64_t consumed() const noexcept { return pos_; }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t pos_ = 0;
};

/// k measured bits from the entropy circuit.
inline std::vector<std::uint8_t> quantum_random_bits(std::size_t k, const NoiseModel& noise, RngStream rng) {
  if (k == 0) throw std::invalid_argument("quantum_random_bits: k must be >= 1");
  QuantumEntropySource source(noise, std::move(rng));
  std::vector<std::uint8_t> bits(k);
  for (auto& b : bits) b = source.next() ? 1 : 0;
  return bits;
}

struct SelectionVector {
  std::size_t round = 0;
  std::vector<std::size_t> selected;  // ascending
  std::uint64_t entropy_bits_consumed = 0;
};

inline std::size_t index_bits(std::size_t n) {
  std::size_t b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

/// Uniform m-subset of {0..n-1} by rejection sampling: read ceil(log2 n)-bit
/// indices (most significant bit first), rejecting values >= n and repeats.
template <BitSource S>
SelectionVector select_clients(std::size_t n, std::size_t m, S& bits, std::size_t round = 0) {
  if (m == 0 || n == 0) throw std::invalid_argument("select_clients: need 1 <= m <= n");
  if (m > n)
    throw std::invalid_argument("select_clients: m=" + std::to_string(m) + " exceeds n=" + std::to_string(n));
  SelectionVector sv;
  sv.round = round;
  if (m == n) {
    sv.selected.resize(n);
    for (std::size_t i = 0; i < n; ++i) sv.selected[i] = i;
    return sv;
  }
  const std::uint64_t start = bits.consumed();
  const std::size_t width = index_bits(n);
  std::vector<bool> taken(n, false);
  while (sv.selected.size() < m) {
    std::size_t idx = 0;
    for (std::size_t b = 0; b < width; ++b) idx = (idx << 1) | (bits.next() ? 1U : 0U);
    if (idx >= n || taken[idx]) continue;
    taken[idx] = true;
    sv.selected.push_back(idx);
  }
  std::sort(sv.selected.begin(), sv.selected.end());
  sv.entropy_bits_consumed = bits.consumed() - start;
  return sv;
}

struct FairnessReport {
  std::vector<std::uint64_t> counts;  // per client
  double expected = 0.0;              // m T / n
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
};

/// Per-client selection counts and Pearson chi-square against uniform
/// participation.
inline FairnessReport fairness_report(std::span<const SelectionVector> history, std::size_t n) {
  if (history.empty()) throw std::invalid_argument("fairness_report: empty history");
  if (n == 0) throw std::invalid_argument("fairness_report: n must be >= 1");
  FairnessReport r;
  r.counts.assign(n, 0);
  std::uint64_t total = 0;
  for (const auto& sv : history) {
    for (std::size_t c : sv.selected) {
      if (c >= n) throw std::out_of_range("fairness_report: client index out of range");
      ++r.counts[c];
    }
    total += sv.selected.size();
  }
  r.expected = static_cast<double>(total) / static_cast<double>(n);
  for (auto c : r.counts) {
    const double d = static_cast<double>(c) - r.expected;
    r.chi_square += d * d / r.expected;
  }
  r.degrees_of_freedom = n - 1;
  return r;
}

inline std::uint64_t binomial_coefficient(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::uint64_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// Pearson chi-square of observed m-subsets against the uniform law over all
/// C(n, m) subsets; degrees of freedom C(n, m) - 1.
inline FairnessReport subset_fairness(std::span<const SelectionVector> history, std::size_t n, std::size_t m) {
  if (history.empty()) throw std::invalid_argument("subset_fairness: empty history");
  const std::uint64_t n_subsets = binomial_coefficient(n, m);
  std::map<std::uint64_t, std::uint64_t> observed;
  for (const auto& sv : history) {
    if (sv.selected.size() != m) throw std::invalid_argument("subset_fairness: selection size != m");
    std::uint64_t mask = 0;
    for (std::size_t c : sv.selected) mask |= std::uint64_t{1} << c;
    ++observed[mask];
  }
  FairnessReport r;
  r.expected = static_cast<double>(history.size()) / static_cast<double>(n_subsets);
  double seen_part = 0.0;
  for (const auto& [mask, count] : observed) {
    r.counts.push_back(count);
    const double d = static_cast<double>(count) - r.expected;
    seen_part += d * d / r.expected;
  }
  // Subsets never observed each contribute (0 - E)^2 / E = E.
  r.chi_square = seen_part + static_cast<double>(n_subsets - observed.size()) * r.expected;
  r.degrees_of_freedom = static_cast<std::size_t>(n_subsets - 1);
  return r;
}

inline double chi_square_quantile(std::size_t degrees_of_freedom, double probability) {
  return boost::math::quantile(boost::math::chi_squared(static_cast<double>(degrees_of_freedom)), probability);
}

}  // namespace nrqfl::qselect
