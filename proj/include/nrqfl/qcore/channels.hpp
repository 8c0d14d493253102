#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nrqfl/qcore/state.hpp"

namespace nrqfl::qcore {

enum class ChannelKind { kIdentity, kDepolarizing, kDephasing, kAmplitudeDamping, kComposite, kCustom };

inline const char* to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::kIdentity: return "identity";
    case ChannelKind::kDepolarizing: return "depolarizing";
    case ChannelKind::kDephasing: return "dephasing";
    case ChannelKind::kAmplitudeDamping: return "amplitude_damping";
    case ChannelKind::kComposite: return "composite";
    case ChannelKind::kCustom: return "custom";
  }
  return "unknown";
}

/// A CPTP map given by Kraus operators {E_k}: rho -> sum_k E_k rho E_k^dagger.
class KrausChannel {
  struct Unchecked {};

 public:
  KrausChannel(std::vector<ComplexMatrix> operators, ChannelKind kind)
      : KrausChannel(std::move(operators), kind, Unchecked{}) {
    const double err = completeness_error();
    if (err >= kTolerance)
      throw std::invalid_argument("KrausChannel: completeness violated (error " + std::to_string(err) + ")");
  }

  /// Builds a channel without the completeness check. Only useful for
  /// exercising the validation path with deliberately broken operator sets.
  static KrausChannel unvalidated(std::vector<ComplexMatrix> operators, ChannelKind kind = ChannelKind::kCustom) {
    return KrausChannel(std::move(operators), kind, Unchecked{});
  }

  static KrausChannel identity() { return KrausChannel({ComplexMatrix::identity(2)}, ChannelKind::kIdentity); }

  const std::vector<ComplexMatrix>& operators() const noexcept { return operators_; }
  ChannelKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return operators_.front().rows(); }

  /// || sum_k E_k^dagger E_k - I ||_F
  double completeness_error() const {
    ComplexMatrix sum(dimension(), dimension());
    for (const auto& op : operators_) sum += op.adjoint() * op;
    return (sum - ComplexMatrix::identity(dimension())).frobenius_norm();
  }

  bool is_complete(double tol = kTolerance) const { return completeness_error() < tol; }

 private:
  KrausChannel(std::vector<ComplexMatrix> operators, ChannelKind kind, Unchecked)
      : operators_(std::move(operators)), kind_(kind) {
    if (operators_.empty()) throw std::invalid_argument("KrausChannel: no operators");
    const std::size_t dim = operators_.front().rows();
    for (const auto& op : operators_)
      if (op.rows() != dim || op.cols() != dim)
        throw std::invalid_argument("KrausChannel: operators must share one square dimension");
  }

  std::vector<ComplexMatrix> operators_;
  ChannelKind kind_;
};

namespace detail {

inline void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string(what) + ": probability " + std::to_string(p) +
                                " outside [0, 1]");
}

}  // namespace detail

/// (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z).
inline KrausChannel depolarizing_channel(double p) {
  detail::require_probability(p, "depolarizing_channel");
  if (p == 0.0) return KrausChannel({gates::identity()}, ChannelKind::kDepolarizing);
  const double a = std::sqrt(1.0 - p);
  const double b = std::sqrt(p / 3.0);
  return KrausChannel({gates::identity() * Complex{a, 0.0}, gates::pauli_x() * Complex{b, 0.0},
                       gates::pauli_y() * Complex{b, 0.0}, gates::pauli_z() * Complex{b, 0.0}},
                      ChannelKind::kDepolarizing);
}

/// (1-p) rho + p Z rho Z.
inline KrausChannel dephasing_channel(double p) {
  detail::require_probability(p, "dephasing_channel");
  if (p == 0.0) return KrausChannel({gates::identity()}, ChannelKind::kDephasing);
  return KrausChannel({gates::identity() * Complex{std::sqrt(1.0 - p), 0.0},
                       gates::pauli_z() * Complex{std::sqrt(p), 0.0}},
                      ChannelKind::kDephasing);
}

/// Energy relaxation |1> -> |0> with probability gamma.
inline KrausChannel amplitude_damping_channel(double gamma) {
  detail::require_probability(gamma, "amplitude_damping_channel");
  ComplexMatrix e0{{1.0, 0.0}, {0.0, std::sqrt(1.0 - gamma)}};
  ComplexMatrix e1{{0.0, std::sqrt(gamma)}, {0.0, 0.0}};
  if (gamma == 0.0) return KrausChannel({std::move(e0)}, ChannelKind::kAmplitudeDamping);
  return KrausChannel({std::move(e0), std::move(e1)}, ChannelKind::kAmplitudeDamping);
}

/// Channel equal to applying `first` and then `second`.
inline KrausChannel compose(const KrausChannel& first, const KrausChannel& second) {
  if (first.dimension() != second.dimension())
    throw std::invalid_argument("compose: channel dimension mismatch");
  std::vector<ComplexMatrix> ops;
  ops.reserve(first.operators().size() * second.operators().size());
  for (const auto& b : second.operators())
    for (const auto& a : first.operators()) ops.push_back(b * a);
  // A broken input stays broken so apply_channel can report it.
  if (!first.is_complete() || !second.is_complete())
    return KrausChannel::unvalidated(std::move(ops), ChannelKind::kComposite);
  return KrausChannel(std::move(ops), ChannelKind::kComposite);
}

/// Applies a single-qubit channel to `target_qubit`. Rejects incomplete
/// operator sets.
inline DensityMatrix apply_channel(const DensityMatrix& state, const KrausChannel& channel,
                                   std::size_t target_qubit) {
  if (channel.dimension() != 2) throw std::invalid_argument("apply_channel: operators must be 2x2");
  const double err = channel.completeness_error();
  if (err >= kTolerance)
    throw std::invalid_argument("apply_channel: Kraus completeness violated (error " +
                                std::to_string(err) + ")");
  state.require_qubit(target_qubit);
  const auto& ops = channel.operators();
  ComplexMatrix out = detail::conjugate_local(ops.front(), state.matrix(), target_qubit);
  for (std::size_t k = 1; k < ops.size(); ++k)
    out += detail::conjugate_local(ops[k], state.matrix(), target_qubit);
  return DensityMatrix::unchecked(std::move(out));
}

/// Applies a channel of full register dimension (used for single-qubit
/// registers and for the commutation check).
inline DensityMatrix apply_channel_full(const DensityMatrix& state, const KrausChannel& channel) {
  if (channel.dimension() != state.dimension())
    throw std::invalid_argument("apply_channel_full: dimension mismatch");
  if (channel.completeness_error() >= kTolerance)
    throw std::invalid_argument("apply_channel_full: Kraus completeness violated");
  ComplexMatrix out(state.dimension(), state.dimension());
  for (const auto& op : channel.operators()) out += op * state.matrix() * op.adjoint();
  return DensityMatrix::unchecked(std::move(out));
}

/// Per-gate noise parameters. Channels act after every gate in the order
/// depolarizing, dephasing, amplitude damping. `readout_flip` applies at
/// measurement. `rotation_jitter` is the standard deviation (radians) of a
/// Gaussian over-rotation drawn once per gate per circuit execution.
struct NoiseModel {
  double p_depol = 0.0;
  double p_deph = 0.0;
  double gamma = 0.0;
  double readout_flip = 0.0;
  double rotation_jitter = 0.0;

  static NoiseModel noiseless() { return {}; }

  void validate() const {
    detail::require_probability(p_depol, "NoiseModel.p_depol");
    detail::require_probability(p_deph, "NoiseModel.p_deph");
    detail::require_probability(gamma, "NoiseModel.gamma");
    detail::require_probability(readout_flip, "NoiseModel.readout_flip");
    if (!(rotation_jitter >= 0.0) || !std::isfinite(rotation_jitter))
      throw std::invalid_argument("NoiseModel.rotation_jitter must be finite and >= 0");
  }

  bool has_gate_noise() const { return p_depol > 0.0 || p_deph > 0.0 || gamma > 0.0; }

  /// The channels applied after each gate, skipping those with zero strength.
  std::vector<KrausChannel> gate_channels() const {
    std::vector<KrausChannel> chans;
    if (p_depol > 0.0) chans.push_back(depolarizing_channel(p_depol));
    if (p_deph > 0.0) chans.push_back(dephasing_channel(p_deph));
    if (gamma > 0.0) chans.push_back(amplitude_damping_channel(gamma));
    return chans;
  }

  /// All per-gate channels folded into one Kraus set (identity if noiseless).
  KrausChannel composite_channel() const {
    KrausChannel out = KrausChannel::identity();
    for (const auto& c : gate_channels()) out = compose(out, c);
    return out;
  }
};

}  // namespace nrqfl::qcore
