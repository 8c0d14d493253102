#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nrqfl/qagg/aggregate.hpp"
#include "nrqfl/qagg/plan.hpp"
#include "nrqfl/qcore.hpp"

namespace nrqfl::qagg {

/// sigma_shot^2 / (N S) + sigma_gate^2 d / N.
inline double variance_bound(const AggregationConfig& cfg, std::size_t n_clients, std::size_t depth) {
  if (n_clients == 0 || cfg.shots == 0) throw std::invalid_argument("variance_bound: N and S must be >= 1");
  const double n = static_cast<double>(n_clients);
  return cfg.sigma_shot * cfg.sigma_shot / (n * static_cast<double>(cfg.shots)) +
         cfg.sigma_gate * cfg.sigma_gate * static_cast<double>(depth) / n;
}

/// Unbiased sample variance of the raw decoded value over `trials`
/// independent executions of `plan`.
inline double empirical_variance(const CircuitPlan& plan, const NoiseModel& noise, const Sampling& sampling,
                                 std::size_t trials, RngStream& rng) {
  if (trials < 2) throw std::invalid_argument("empirical_variance: need at least 2 trials");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double x = run_plan(plan, noise, sampling, rng).raw_value.value();
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  return m2 / static_cast<double>(trials - 1);
}

struct CommutationResult {
  double lhs = 0.0;  // Tr(M rho)
  double rhs = 0.0;  // Tr(M E(rho))
  bool holds = false;
};

inline CommutationResult commutation_check(const qcore::KrausChannel& channel, const qcore::Observable& m,
                                           const qcore::DensityMatrix& state) {
  if (m.matrix().rows() != state.dimension() || channel.dimension() != state.dimension())
    throw std::invalid_argument("commutation_check: dimension mismatch");
  CommutationResult r;
  r.lhs = qcore::expectation(state, m);
  r.rhs = qcore::expectation(qcore::apply_channel_full(state, channel), m);
  r.holds = std::abs(r.lhs - r.rhs) < qcore::kTolerance;
  return r;
}

/// D(rho, E(rho)): the deviation a single channel application causes.
inline double noise_deviation(const qcore::DensityMatrix& state, const qcore::KrausChannel& channel) {
  return qcore::trace_distance(state, qcore::apply_channel_full(state, channel));
}

/// Largest per-gate deviation max_j D(rho_j, E(rho_j)) over the ideal
/// aggregated states rho_j = encode(mean angle_j), E the per-gate noise.
inline double round_noise_deviation(std::span<const double> ideal_angles, const NoiseModel& noise) {
  const auto channel = noise.composite_channel();
  double eps = 0.0;
  for (double a : ideal_angles)
    eps = std::max(eps, noise_deviation(encode::encode(encode::EncodedAngle::clamped(a)), channel));
  return eps;
}

/// One point of a variance sweep.
struct VarianceSample {
  std::uint64_t shots = 0;
  std::size_t depth = 0;
  std::size_t n_clients = 0;
  double empirical = 0.0;
};

/// Measures the raw-estimate variance of a random aggregation plan with the
/// given (S, d, N).
inline VarianceSample measure_variance(std::uint64_t shots, std::size_t depth, std::size_t n_clients,
                                       const NoiseModel& noise, std::size_t trials, RngStream& rng) {
  std::vector<EncodedAngle> angles;
  angles.reserve(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) angles.emplace_back(rng.uniform() * encode::kHalfPi);
  const CircuitPlan plan = build_plan_with_depth(angles, depth);
  return {shots, depth, n_clients, empirical_variance(plan, noise, Sampling::with_shots(shots), trials, rng)};
}

/// Fits sigma_gate once from a calibration sweep: the smallest value for
/// which every sweep point satisfies the bound at the given sigma_shot.
inline double fit_sigma_gate(std::span<const VarianceSample> sweep, double sigma_shot) {
  double s2 = 0.0;
  for (const auto& v : sweep) {
    const double n = static_cast<double>(v.n_clients);
    const double shot_term = sigma_shot * sigma_shot / (n * static_cast<double>(v.shots));
    s2 = std::max(s2, (v.empirical - shot_term) * n / static_cast<double>(v.depth));
  }
  return std::sqrt(std::max(s2, 0.0));
}

}  // namespace nrqfl::qagg
