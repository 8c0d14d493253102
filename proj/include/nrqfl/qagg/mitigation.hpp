#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/qagg/plan.hpp"

namespace nrqfl::qagg {

/// Bloch-vector contraction of `d` depolarizing layers: (1 - 4p/3)^d.
inline double depolarizing_attenuation(double p_depol, std::size_t depth) {
  return std::pow(1.0 - 4.0 * p_depol / 3.0, static_cast<double>(depth));
}

inline constexpr double kMinInvertibleAttenuation = 1e-6;

/// Undoes depolarizing attenuation of <Z>: z / lambda^d, clamped to [-1, 1].
inline double mitigate_channel_inversion(double raw_z, const NoiseModel& noise, std::size_t depth) {
  const double att = depolarizing_attenuation(noise.p_depol, depth);
  if (att < kMinInvertibleAttenuation)
    throw std::domain_error("mitigate_channel_inversion: attenuation " + std::to_string(att) +
                            " below 1e-6; depth/noise combination is not mitigable");
  return std::clamp(raw_z / att, -1.0, 1.0);
}

/// Fitted affine map from ideal <Z> to noisy <Z>: noisy = attenuation*ideal + offset.
/// With three or more probes the measured response is also kept as a
/// monotone table, and `invert` interpolates it. Damping offsets are rotated
/// by later gates, so the true response bends away from the affine fit.
struct TransferFunction {
  double attenuation = 1.0;
  double offset = 0.0;
  std::vector<double> ideal_z;  // ascending
  std::vector<double> noisy_z;  // non-decreasing, same length

  double apply(double ideal_z) const noexcept { return attenuation * ideal_z + offset; }

  double invert(double noisy) const noexcept {
    if (ideal_z.size() < 3) return std::clamp((noisy - offset) / attenuation, -1.0, 1.0);
    const std::size_t last = noisy_z.size() - 1;
    // Segment [i, i+1] containing `noisy`; the end segments extrapolate.
    std::size_t i = static_cast<std::size_t>(std::upper_bound(noisy_z.begin(), noisy_z.end(), noisy) -
                                             noisy_z.begin());
    i = std::clamp<std::size_t>(i, 1, last) - 1;
    while (i > 0 && noisy_z[i + 1] - noisy_z[i] <= 0.0) --i;
    while (i + 1 < last && noisy_z[i + 1] - noisy_z[i] <= 0.0) ++i;
    const double dy = noisy_z[i + 1] - noisy_z[i];
    if (dy <= 0.0) return std::clamp((noisy - offset) / attenuation, -1.0, 1.0);
    const double t = (noisy - noisy_z[i]) / dy;
    return std::clamp(ideal_z[i] + t * (ideal_z[i + 1] - ideal_z[i]), -1.0, 1.0);
  }
};

namespace detail {

/// Pool-adjacent-violators: least-squares non-decreasing fit of `y`.
inline std::vector<double> isotonic(const std::vector<double>& y) {
  std::vector<double> mean;
  std::vector<std::size_t> size;
  for (double v : y) {
    mean.push_back(v);
    size.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const std::size_t n = size[size.size() - 2] + size.back();
      const double m = (mean[mean.size() - 2] * static_cast<double>(size[size.size() - 2]) +
                        mean.back() * static_cast<double>(size.back())) /
                       static_cast<double>(n);
      mean.pop_back();
      size.pop_back();
      mean.back() = m;
      size.back() = n;
    }
  }
  std::vector<double> out;
  for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), size[b], mean[b]);
  return out;
}

}  // namespace detail

inline const std::vector<double>& default_probe_angles() {
  static const std::vector<double> probes = [] {
    std::vector<double> a;
    for (int i = 0; i <= 16; ++i) a.push_back(encode::kHalfPi * i / 16.0);
    return a;
  }();
  return probes;
}

/// Probe plan at `depth` whose ideal output is encode(angle): every gate
/// carries an equal share of the rotation.
inline CircuitPlan probe_plan(double angle, std::size_t depth) {
  CircuitPlan plan;
  plan.rotations.assign(depth, 2.0 * angle / static_cast<double>(depth));
  return plan;
}

/// Runs probe circuits with known ideal outputs and least-squares fits the
/// noisy-vs-ideal <Z> transfer. Each probe is executed `repeats` times and
/// the shots pooled.
inline TransferFunction calibrate(const NoiseModel& noise, std::size_t depth, std::span<const double> probe_angles,
                                  const Sampling& sampling, RngStream& rng, std::size_t repeats = 1) {
  if (depth == 0 || depth > kMaxDepth) throw std::invalid_argument("calibrate: depth must be in [1, 9]");
  if (std::set<double>(probe_angles.begin(), probe_angles.end()).size() < 2)
    throw std::invalid_argument("calibrate: need at least two distinct probe angles");
  repeats = std::max<std::size_t>(repeats, 1);

  std::vector<double> xs;
  std::vector<double> ys;
  for (double a : probe_angles) {
    const CircuitPlan plan = probe_plan(a, depth);
    double p_sum = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) p_sum += run_plan(plan, noise, sampling, rng).p1_observed;
    xs.push_back(std::cos(2.0 * a));
    ys.push_back(1.0 - 2.0 * p_sum / static_cast<double>(repeats));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("calibrate: degenerate probe angles");
  TransferFunction tf;
  tf.attenuation = sxy / sxx;
  tf.offset = my - tf.attenuation * mx;
  if (!(tf.attenuation > kMinInvertibleAttenuation))
    throw std::domain_error("calibrate: fitted attenuation " + std::to_string(tf.attenuation) +
                            " is not positive; noise too strong to mitigate");

  std::set<double> distinct(xs.begin(), xs.end());
  if (distinct.size() >= 3) {
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    // Repeated probe angles are averaged into one table point.
    std::vector<double> sorted_y;
    for (std::size_t k = 0; k < order.size();) {
      std::size_t j = k;
      double sum = 0.0;
      while (j < order.size() && xs[order[j]] == xs[order[k]]) sum += ys[order[j++]];
      tf.ideal_z.push_back(xs[order[k]]);
      sorted_y.push_back(sum / static_cast<double>(j - k));
      k = j;
    }
    tf.noisy_z = detail::isotonic(sorted_y);
  }
  return tf;
}

}  // namespace nrqfl::qagg
