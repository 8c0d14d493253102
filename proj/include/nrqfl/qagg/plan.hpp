#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/encode.hpp"
#include "nrqfl/qcore.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::qagg {

using encode::EncodedAngle;
using qcore::NoiseModel;

/// Gate depth must stay below 10.
inline constexpr std::size_t kMaxDepth = 9;

/// Gate sequence for one qubit of the aggregation register. Every entry is an
/// Ry rotation angle; a noise channel follows each gate, so depth() is also
/// the number of noise locations.
struct CircuitPlan {
  std::vector<double> rotations;

  std::size_t depth() const noexcept { return rotations.size(); }
};

/// Rotation Ry(2 a_k / N) per client. Rotations about one axis add, so the
/// noiseless output is Ry(2 mean(a))|0> and decodes to the mean angle.
inline CircuitPlan build_plan(std::span<const EncodedAngle> angles, std::size_t n_clients) {
  if (n_clients == 0) throw std::invalid_argument("build_plan: no clients");
  if (angles.size() != n_clients)
    throw std::invalid_argument("build_plan: got " + std::to_string(angles.size()) + " angles for " +
                                std::to_string(n_clients) + " clients");
  if (n_clients > kMaxDepth)
    throw std::invalid_argument("build_plan: " + std::to_string(n_clients) +
                                " clients exceed depth limit 9; split into groups");
  CircuitPlan plan;
  plan.rotations.reserve(n_clients);
  const double scale = 2.0 / static_cast<double>(n_clients);
  for (const auto& a : angles) plan.rotations.push_back(scale * a.value());
  return plan;
}

/// Same aggregate rotation laid out at an explicit depth: adjacent client
/// rotations are fused when depth < N, and idle (identity) gates are
/// appended when depth > N. Idle gates still carry gate noise.
inline CircuitPlan build_plan_with_depth(std::span<const EncodedAngle> angles, std::size_t depth) {
  const std::size_t n = angles.size();
  if (n == 0) throw std::invalid_argument("build_plan_with_depth: no clients");
  if (depth == 0 || depth > kMaxDepth)
    throw std::invalid_argument("build_plan_with_depth: depth must be in [1, 9]");
  const double scale = 2.0 / static_cast<double>(n);
  CircuitPlan plan;
  plan.rotations.assign(depth, 0.0);
  if (depth >= n) {
    for (std::size_t k = 0; k < n; ++k) plan.rotations[k] = scale * angles[k].value();
  } else {
    // Chunk k of the fused layout holds clients [k*n/depth, (k+1)*n/depth).
    for (std::size_t g = 0; g < depth; ++g) {
      const std::size_t begin = g * n / depth;
      const std::size_t end = (g + 1) * n / depth;
      for (std::size_t k = begin; k < end; ++k) plan.rotations[g] += scale * angles[k].value();
    }
  }
  return plan;
}

/// Measurement mode: a finite number of shots, or exact expectations (the
/// infinite-shot limit).
struct Sampling {
  std::optional<std::uint64_t> shots;

  static Sampling exact() { return Sampling{std::nullopt}; }
  static Sampling with_shots(std::uint64_t s) {
    if (s == 0) throw std::invalid_argument("Sampling: shots must be >= 1");
    return Sampling{s};
  }
  bool is_exact() const noexcept { return !shots.has_value(); }
};

/// Outcome of executing one plan once.
struct RawRun {
  double p1_true = 0.0;      // P(1) of the final state, before readout error
  double p1_observed = 0.0;  // exact observed P(1), or ones/shots when sampled
  qcore::Counts counts;      // empty in exact mode
  EncodedAngle raw_value{0.0};

  double z() const noexcept { return 1.0 - 2.0 * p1_observed; }
};

/// Simulates plans of equal depth on one register, one plan per qubit, and
/// returns the final P(1) of each qubit. `streams[q]` supplies that qubit's
/// rotation jitter, so results do not depend on how plans are batched.
inline std::vector<double> simulate_batch(std::span<const CircuitPlan* const> plans, const NoiseModel& noise,
                                          std::span<RngStream* const> streams) {
  const std::size_t k = plans.size();
  if (k == 0 || k > qcore::kMaxQubits) throw std::invalid_argument("simulate_batch: 1..6 plans per register");
  if (streams.size() != k) throw std::invalid_argument("simulate_batch: one stream per plan required");
  const std::size_t depth = plans.front()->depth();
  for (const auto* p : plans)
    if (p->depth() != depth) throw std::invalid_argument("simulate_batch: plans must share depth");

  const auto channels = noise.gate_channels();
  auto state = qcore::DensityMatrix::ground(k);
  for (std::size_t g = 0; g < depth; ++g) {
    for (std::size_t q = 0; q < k; ++q) {
      double theta = plans[q]->rotations[g];
      if (noise.rotation_jitter > 0.0) theta += streams[q]->normal(0.0, noise.rotation_jitter);
      state = qcore::apply_unitary(state, qcore::ry(theta), q);
      for (const auto& ch : channels) state = qcore::apply_channel(state, ch, q);
    }
  }
  std::vector<double> p1(k);
  for (std::size_t q = 0; q < k; ++q) p1[q] = std::clamp(state.probability_one(q), 0.0, 1.0);
  return p1;
}

/// Converts a final-state P(1) into a measured run.
inline RawRun measure_probability(double p1_true, const NoiseModel& noise, const Sampling& sampling,
                                  RngStream& rng) {
  RawRun run;
  run.p1_true = p1_true;
  const double p_obs = qcore::observed_probability_one(p1_true, noise.readout_flip);
  if (sampling.is_exact()) {
    run.p1_observed = p_obs;
    run.raw_value = encode::angle_from_probability(p_obs);
  } else {
    run.counts = qcore::sample_counts(p1_true, *sampling.shots, rng, noise.readout_flip);
    run.p1_observed = static_cast<double>(run.counts.ones) / static_cast<double>(*sampling.shots);
    run.raw_value = encode::decode_shots(run.counts);
  }
  return run;
}

/// Executes a plan on a fresh |0>: gate, then noise, for every gate; then
/// measurement (exact or `shots` samples with readout error).
inline RawRun run_plan(const CircuitPlan& plan, const NoiseModel& noise, const Sampling& sampling,
                       RngStream& rng) {
  if (plan.depth() == 0) throw std::invalid_argument("run_plan: empty plan");
  const CircuitPlan* plans[] = {&plan};
  RngStream* streams[] = {&rng};
  const double p1 = simulate_batch(plans, noise, streams).front();
  return measure_probability(p1, noise, sampling, rng);
}

/// Final single-qubit state of a plan (no jitter, no readout). Used for
/// diagnostics and the trace-distance report.
inline qcore::DensityMatrix final_state(const CircuitPlan& plan, const NoiseModel& noise) {
  const auto channels = noise.gate_channels();
  auto state = qcore::DensityMatrix::ground(1);
  for (double theta : plan.rotations) {
    state = qcore::apply_unitary(state, qcore::ry(theta), 0);
    for (const auto& ch : channels) state = qcore::apply_channel(state, ch, 0);
  }
  return state;
}

}  // namespace nrqfl::qagg
