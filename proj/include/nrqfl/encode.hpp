#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nrqfl/qcore.hpp"

namespace nrqfl::encode {

inline constexpr double kHalfPi = std::numbers::pi / 2.0;

/// Parameter-space interval mapped onto the encoding range [0, pi/2].
class WeightBounds {
 public:
  WeightBounds(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw std::invalid_argument("WeightBounds: need finite lo < hi, got [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
  }

  /// Bounds spanning [lo, hi], widened symmetrically when the interval is
  /// degenerate (all clients agree).
  static WeightBounds covering(double lo, double hi, double min_width = 1e-9) {
    if (hi - lo < min_width) {
      const double mid = 0.5 * (lo + hi);
      return WeightBounds(mid - 0.5 * min_width, mid + 0.5 * min_width);
    }
    return WeightBounds(lo, hi);
  }

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double width() const noexcept { return hi_ - lo_; }
  bool contains(double w) const noexcept { return w >= lo_ && w <= hi_; }

 private:
  double lo_;
  double hi_;
};

/// Encoding angle in [0, pi/2]; the state is cos(a)|0> + sin(a)|1>.
class EncodedAngle {
 public:
  explicit EncodedAngle(double angle) : angle_(angle) {
    if (!(angle >= 0.0 && angle <= kHalfPi))
      throw std::invalid_argument("EncodedAngle: " + std::to_string(angle) + " outside [0, pi/2]");
  }

  /// Clamps into range; for estimator outputs that drift by rounding.
  static EncodedAngle clamped(double angle) { return EncodedAngle(std::clamp(angle, 0.0, kHalfPi)); }

  double value() const noexcept { return angle_; }
  operator double() const noexcept { return angle_; }

 private:
  double angle_;
};

inline EncodedAngle normalize(double w, const WeightBounds& bounds) {
  if (!std::isfinite(w)) throw std::invalid_argument("normalize: non-finite weight");
  const double t = std::clamp((w - bounds.lo()) / bounds.width(), 0.0, 1.0);
  return EncodedAngle(kHalfPi * t);
}

inline double denormalize(EncodedAngle a, const WeightBounds& bounds) {
  return bounds.lo() + bounds.width() * (a.value() / kHalfPi);
}

/// Single-qubit state Ry(2a)|0>.
inline qcore::DensityMatrix encode(EncodedAngle a) {
  return qcore::make_pure_state({qcore::Complex{std::cos(a.value()), 0.0},
                                 qcore::Complex{std::sin(a.value()), 0.0}});
}

/// Inverts P(1) = sin^2(a), given both outcome masses. atan2 keeps the
/// inverse well conditioned near a = pi/2 where arcsin(sqrt(p)) is not.
inline EncodedAngle angle_from_masses(double p0, double p1) {
  return EncodedAngle::clamped(std::atan2(std::sqrt(std::max(p1, 0.0)), std::sqrt(std::max(p0, 0.0))));
}

inline EncodedAngle angle_from_probability(double p1) {
  const double p = std::clamp(p1, 0.0, 1.0);
  return angle_from_masses(1.0 - p, p);
}

/// Inverts <Z> = cos(2a).
inline EncodedAngle angle_from_z(double z) {
  const double zc = std::clamp(z, -1.0, 1.0);
  return angle_from_masses(1.0 + zc, 1.0 - zc);
}

inline EncodedAngle decode_exact(const qcore::DensityMatrix& state) {
  if (state.n_qubits() != 1) throw std::invalid_argument("decode_exact: expects a single-qubit state");
  return angle_from_masses(state(0, 0).real(), state(1, 1).real());
}

inline EncodedAngle decode_shots(const qcore::Counts& counts) {
  if (counts.total() == 0) throw std::invalid_argument("decode_shots: zero total shots");
  return angle_from_masses(static_cast<double>(counts.zeros), static_cast<double>(counts.ones));
}

}  // namespace nrqfl::encode
