#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "nrqfl/qcore/state.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::qcore {

struct Counts {
  std::uint64_t zeros = 0;
  std::uint64_t ones = 0;

  std::uint64_t total() const noexcept { return zeros + ones; }
  friend bool operator==(const Counts&, const Counts&) = default;
};

/// Probability of reading 1 once each outcome is flipped with `readout_flip`.
inline double observed_probability_one(double p1, double readout_flip) {
  const double p = p1 * (1.0 - readout_flip) + (1.0 - p1) * readout_flip;
  return std::clamp(p, 0.0, 1.0);
}

/// Counts for `shots` i.i.d. measurements of a qubit with P(1) = `p1`, each
/// outcome flipped independently with probability `readout_flip`. The shots
/// are Bernoulli with the post-flip probability, so the count of ones is
/// drawn from the equivalent binomial law in one step.
inline Counts sample_counts(double p1, std::uint64_t shots, RngStream& rng, double readout_flip = 0.0) {
  if (shots == 0) throw std::invalid_argument("sample_measurement: shots must be >= 1");
  if (!(readout_flip >= 0.0 && readout_flip <= 1.0))
    throw std::invalid_argument("sample_measurement: readout_flip outside [0, 1]");
  const double p = observed_probability_one(std::clamp(p1, 0.0, 1.0), readout_flip);
  std::binomial_distribution<std::uint64_t> draw(shots, p);
  const std::uint64_t ones = draw(rng.engine());
  return Counts{shots - ones, ones};
}

inline Counts sample_measurement(const DensityMatrix& state, std::size_t target_qubit,
                                 std::uint64_t shots, RngStream& rng, double readout_flip = 0.0) {
  return sample_counts(state.probability_one(target_qubit), shots, rng, readout_flip);
}

}  // namespace nrqfl::qcore
