#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/encode.hpp"
#include "nrqfl/qagg/mitigation.hpp"
#include "nrqfl/qagg/plan.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::qagg {

using encode::WeightBounds;

struct MitigationFlags {
  bool measurement_averaging = false;
  bool channel_inversion = false;
  bool calibration = false;

  static MitigationFlags none() { return {}; }
  static MitigationFlags all() { return {true, true, true}; }
  bool any() const noexcept { return measurement_averaging || channel_inversion || calibration; }
};

struct AggregationConfig {
  std::uint64_t shots = 4096;
  /// Use exact expectations instead of sampling (the infinite-shot limit).
  bool exact_expectation = false;
  /// Independent circuit repetitions R, used when measurement averaging is on.
  std::size_t repeats = 1;
  MitigationFlags mitigation;
  /// Parameters of the variance bound sigma_shot^2/(N S) + sigma_gate^2 d/N.
  double sigma_shot = 0.5;
  double sigma_gate = 0.0;
  std::size_t max_qubits_per_batch = 1;
  std::vector<double> probe_angles = default_probe_angles();

  void validate() const {
    if (shots == 0) throw std::invalid_argument("AggregationConfig: shots must be >= 1");
    if (repeats == 0) throw std::invalid_argument("AggregationConfig: repeats must be >= 1");
    if (max_qubits_per_batch == 0 || max_qubits_per_batch > qcore::kMaxQubits)
      throw std::invalid_argument("AggregationConfig: max_qubits_per_batch must be in [1, 6]");
    if (!(sigma_shot >= 0.0) || !(sigma_gate >= 0.0))
      throw std::invalid_argument("AggregationConfig: sigma parameters must be >= 0");
  }

  Sampling sampling() const { return exact_expectation ? Sampling::exact() : Sampling::with_shots(shots); }
  std::size_t effective_repeats() const { return mitigation.measurement_averaging ? repeats : 1; }
};

/// Aggregate of one parameter, in angle units.
struct AggregateEstimate {
  double value = 0.0;      // after mitigation
  double raw_value = 0.0;  // decoded directly from the measured frequency
  double variance_estimate = 0.0;
};

struct AggregationResult {
  std::vector<double> values;  // model-weight units
  std::vector<AggregateEstimate> estimates;
  std::vector<double> ideal_angles;  // exact mean of the client angles
  std::vector<std::size_t> group_sizes;
  std::size_t clipped = 0;  // client values outside their bounds
};

/// Group sizes used when more clients than the depth limit must be combined:
/// consecutive groups of at most 9.
inline std::vector<std::size_t> split_groups(std::size_t n_clients) {
  std::vector<std::size_t> sizes;
  for (std::size_t left = n_clients; left > 0;) {
    const std::size_t g = std::min(left, kMaxDepth);
    sizes.push_back(g);
    left -= g;
  }
  return sizes;
}

namespace detail {

inline double estimator_variance(double p_obs, std::uint64_t total_shots, double slope, double z_corrected) {
  const double var_z = 4.0 * p_obs * (1.0 - p_obs) / static_cast<double>(total_shots);
  const double denom = 4.0 * std::max(1.0 - z_corrected * z_corrected, 1e-12);
  return var_z * slope * slope / denom;
}

}  // namespace detail

/// Quantum aggregation of N client vectors of P parameters.
///
/// Per parameter: normalize each client value into an angle, run the
/// aggregation circuit (R repetitions when measurement averaging is on),
/// correct <Z> by calibration or depolarizing inversion, decode and
/// denormalize. Clients beyond 9 are split into groups whose results are
/// combined by a size-weighted classical mean.
///
/// Randomness for parameter j of group g comes from a stream derived from
/// (seed, g, j) so the result is independent of batching and execution order.
inline AggregationResult aggregate(std::span<const std::vector<double>> clients, std::span<const WeightBounds> bounds,
                                   const AggregationConfig& cfg, const NoiseModel& noise, std::uint64_t seed) {
  cfg.validate();
  noise.validate();
  if (clients.empty()) throw std::invalid_argument("aggregate: empty client set");
  const std::size_t n_clients = clients.size();
  const std::size_t n_params = clients.front().size();
  for (const auto& c : clients)
    if (c.size() != n_params) throw std::invalid_argument("aggregate: client vector length mismatch");
  if (bounds.size() != n_params)
    throw std::invalid_argument("aggregate: " + std::to_string(bounds.size()) + " bounds for " +
                                std::to_string(n_params) + " parameters");

  AggregationResult result;
  result.values.assign(n_params, 0.0);
  result.estimates.assign(n_params, {});
  result.ideal_angles.assign(n_params, 0.0);
  result.group_sizes = split_groups(n_clients);

  std::vector<std::vector<EncodedAngle>> angles(n_params);
  for (std::size_t j = 0; j < n_params; ++j) {
    angles[j].reserve(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
      if (!bounds[j].contains(clients[i][j])) ++result.clipped;
      angles[j].push_back(encode::normalize(clients[i][j], bounds[j]));
      result.ideal_angles[j] += angles[j].back().value();
    }
    result.ideal_angles[j] /= static_cast<double>(n_clients);
  }

  const Sampling sampling = cfg.sampling();
  const std::size_t repeats = cfg.effective_repeats();
  const bool redraw_each_repeat = noise.rotation_jitter > 0.0;
  std::map<std::size_t, TransferFunction> transfer_by_depth;

  std::size_t first_client = 0;
  for (std::size_t g = 0; g < result.group_sizes.size(); ++g) {
    const std::size_t n_group = result.group_sizes[g];
    const std::size_t depth = n_group;
    const double group_weight = static_cast<double>(n_group) / static_cast<double>(n_clients);

    const TransferFunction* transfer = nullptr;
    if (cfg.mitigation.calibration) {
      auto it = transfer_by_depth.find(depth);
      if (it == transfer_by_depth.end()) {
        RngStream calib_rng(derive_seed(seed, {tag(StreamTag::kCalibration), depth}));
        it = transfer_by_depth
                 .emplace(depth, calibrate(noise, depth, cfg.probe_angles, sampling, calib_rng, repeats))
                 .first;
      }
      transfer = &it->second;
    }

    std::vector<CircuitPlan> plans(n_params);
    std::vector<RngStream> streams;
    streams.reserve(n_params);
    for (std::size_t j = 0; j < n_params; ++j) {
      plans[j] = build_plan(std::span(angles[j]).subspan(first_client, n_group), n_group);
      streams.emplace_back(derive_seed(seed, {tag(StreamTag::kAggregation), g, j}));
    }

    std::vector<double> p_obs_sum(n_params, 0.0);
    for (std::size_t begin = 0; begin < n_params; begin += cfg.max_qubits_per_batch) {
      const std::size_t end = std::min(n_params, begin + cfg.max_qubits_per_batch);
      std::vector<const CircuitPlan*> batch_plans;
      std::vector<RngStream*> batch_streams;
      for (std::size_t j = begin; j < end; ++j) {
        batch_plans.push_back(&plans[j]);
        batch_streams.push_back(&streams[j]);
      }
      std::vector<double> p1;
      for (std::size_t r = 0; r < repeats; ++r) {
        if (r == 0 || redraw_each_repeat) p1 = simulate_batch(batch_plans, noise, batch_streams);
        for (std::size_t j = begin; j < end; ++j)
          p_obs_sum[j] += measure_probability(p1[j - begin], noise, sampling, streams[j]).p1_observed;
      }
    }

    for (std::size_t j = 0; j < n_params; ++j) {
      const double p_obs = p_obs_sum[j] / static_cast<double>(repeats);
      const double z = 1.0 - 2.0 * p_obs;
      double z_corrected = z;
      double slope = 1.0;
      if (transfer != nullptr) {
        z_corrected = transfer->invert(z);
        slope = 1.0 / transfer->attenuation;
      } else if (cfg.mitigation.channel_inversion) {
        z_corrected = mitigate_channel_inversion(z, noise, depth);
        slope = 1.0 / depolarizing_attenuation(noise.p_depol, depth);
      }
      const double raw = encode::angle_from_probability(p_obs).value();
      const double value = encode::angle_from_z(z_corrected).value();
      const double var = sampling.is_exact()
                             ? 0.0
                             : detail::estimator_variance(p_obs, *sampling.shots * repeats, slope, z_corrected);
      auto& est = result.estimates[j];
      est.value += group_weight * value;
      est.raw_value += group_weight * raw;
      est.variance_estimate += group_weight * group_weight * var;
    }
    first_client += n_group;
  }

  for (std::size_t j = 0; j < n_params; ++j) {
    const auto angle = EncodedAngle::clamped(result.estimates[j].value);
    result.values[j] = encode::denormalize(angle, bounds[j]);
  }
  return result;
}

namespace detail {

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

/// Coordinate-wise median of several aggregate vectors.
inline std::vector<double> median_combine(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw std::invalid_argument("median_combine: no vectors");
  const std::size_t p = vectors.front().size();
  std::vector<double> out(p);
  std::vector<double> column(vectors.size());
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t s = 0; s < vectors.size(); ++s) {
      if (vectors[s].size() != p) throw std::invalid_argument("median_combine: length mismatch");
      column[s] = vectors[s][j];
    }
    out[j] = detail::median(column);
  }
  return out;
}

/// Hook for fault-injection tests: may rewrite server `s`'s output.
using ServerTamper = std::function<void(std::size_t server, AggregationResult&)>;

/// Runs `aggregate` on `n_servers` independent servers and combines their
/// outputs by coordinate-wise median. Server 0 uses `seed` unchanged, so a
/// single server reproduces `aggregate` exactly.
inline AggregationResult replicated_aggregate(std::span<const std::vector<double>> clients,
                                              std::span<const WeightBounds> bounds, const AggregationConfig& cfg,
                                              const NoiseModel& noise, std::size_t n_servers, std::uint64_t seed,
                                              const ServerTamper& tamper = {}) {
  if (n_servers == 0) throw std::invalid_argument("replicated_aggregate: n_servers must be >= 1");
  std::vector<AggregationResult> per_server;
  per_server.reserve(n_servers);
  for (std::size_t s = 0; s < n_servers; ++s) {
    const std::uint64_t server_seed = s == 0 ? seed : derive_seed(seed, {tag(StreamTag::kServer), s});
    per_server.push_back(aggregate(clients, bounds, cfg, noise, server_seed));
    if (tamper) tamper(s, per_server.back());
  }
  if (n_servers == 1) return std::move(per_server.front());

  AggregationResult combined = per_server.front();
  std::vector<std::vector<double>> values;
  values.reserve(n_servers);
  for (const auto& r : per_server) values.push_back(r.values);
  combined.values = median_combine(values);

  const std::size_t p = combined.estimates.size();
  std::vector<double> v(n_servers), raw(n_servers), var(n_servers);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t s = 0; s < n_servers; ++s) {
      v[s] = per_server[s].estimates[j].value;
      raw[s] = per_server[s].estimates[j].raw_value;
      var[s] = per_server[s].estimates[j].variance_estimate;
    }
    combined.estimates[j].value = detail::median(v);
    combined.estimates[j].raw_value = detail::median(raw);
    combined.estimates[j].variance_estimate = detail::median(var);
  }
  return combined;
}

}  // namespace nrqfl::qagg
