#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nrqfl/encode.hpp"
#include "nrqfl/qagg.hpp"
#include "nrqfl/qcore.hpp"
#include "nrqfl/qselect.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::validation {

inline constexpr const char* kSuiteVersion = "1.0.0";

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Haar-random pure state on n qubits.
inline qcore::DensityMatrix random_pure_state(std::size_t n_qubits, RngStream& rng) {
  std::vector<qcore::Complex> amps(std::size_t{1} << n_qubits);
  double norm2 = 0.0;
  for (auto& a : amps) {
    a = {rng.normal(), rng.normal()};
    norm2 += std::norm(a);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& a : amps) a *= inv;
  return qcore::make_pure_state(amps);
}

/// Random mixed state G G^dagger / Tr(G G^dagger) with complex Gaussian G.
inline qcore::DensityMatrix random_mixed_state(std::size_t n_qubits, RngStream& rng) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  qcore::ComplexMatrix g(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) g(r, c) = {rng.normal(), rng.normal()};
  qcore::ComplexMatrix rho = g * g.adjoint();
  rho *= qcore::Complex{1.0 / rho.trace().real(), 0.0};
  // Exact Hermitian symmetrization against rounding.
  qcore::ComplexMatrix herm = rho;
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) herm(r, c) = 0.5 * (rho(r, c) + std::conj(rho(c, r)));
  return qcore::DensityMatrix::from_matrix(std::move(herm));
}

struct SuiteOptions {
  qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  std::uint64_t seed = 1;
  /// Negative control: adds a Kraus set that violates completeness.
  bool inject_broken_channel = false;
  std::size_t variance_configs = 1000;
  std::size_t variance_trials = 200;
  double sigma_shot = 0.5;
  /// Rotation jitter used as the stochastic gate-noise source in the
  /// variance checks.
  double gate_jitter = 0.02;
};

inline std::vector<double> probability_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 100; ++i) g.push_back(i / 100.0);
  return g;
}

inline CheckResult check_cptp(const SuiteOptions& opt) {
  std::vector<qcore::KrausChannel> channels;
  for (double p : probability_grid()) {
    channels.push_back(qcore::depolarizing_channel(p));
    channels.push_back(qcore::dephasing_channel(p));
    channels.push_back(qcore::amplitude_damping_channel(p));
  }
  if (opt.inject_broken_channel)
    channels.push_back(qcore::KrausChannel::unvalidated({qcore::gates::identity(), qcore::gates::pauli_x() * 0.3}));

  double worst_completeness = 0.0;
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  for (const auto& ch : channels) worst_completeness = std::max(worst_completeness, ch.completeness_error());

  RngStream rng(derive_seed(opt.seed, {101}));
  for (std::size_t s = 0; s < 100; ++s) {
    const auto rho = s % 2 == 0 ? random_pure_state(1, rng) : random_mixed_state(1, rng);
    for (std::size_t c = s % 7; c < channels.size(); c += 7) {
      if (!channels[c].is_complete()) continue;
      const auto out = qcore::apply_channel_full(rho, channels[c]);
      worst_trace = std::max(worst_trace, std::abs(out.matrix().trace().real() - 1.0));
      worst_eig = std::min(worst_eig, out.min_eigenvalue());
    }
  }
  const bool ok = worst_completeness < 1e-10 && worst_trace < 1e-10 && worst_eig >= -1e-9;
  return {"cptp_channels", ok,
          "max completeness error " + num(worst_completeness) + ", max |Tr-1| " +
              num(worst_trace) + ", min eigenvalue " + num(worst_eig) + " over " +
              std::to_string(channels.size()) + " channels"};
}

inline CheckResult check_depolarizing_contraction(const SuiteOptions&) {
  double worst = 0.0;
  for (double p : {0.01, 0.05, 0.2}) {
    auto rho = qcore::DensityMatrix::ground(1);
    const auto ch = qcore::depolarizing_channel(p);
    for (int k = 1; k <= 10; ++k) {
      rho = qcore::apply_channel(rho, ch, 0);
      const double expected = std::pow(1.0 - 4.0 * p / 3.0, k);
      worst = std::max(worst, std::abs(qcore::expectation(rho, qcore::Observable::pauli_z()) - expected));
    }
  }
  return {"depolarizing_contraction", worst < 1e-10, "max deviation " + num(worst)};
}

inline CheckResult check_encode_round_trip(const SuiteOptions&) {
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = encode::kHalfPi * i / 999.0;
    worst = std::max(worst, std::abs(encode::decode_exact(encode::encode(encode::EncodedAngle(a))).value() - a));
  }
  return {"encode_round_trip", worst < 1e-12, "max |decode(encode(a)) - a| = " + num(worst)};
}

inline CheckResult check_linearity(const SuiteOptions& opt) {
  RngStream rng(derive_seed(opt.seed, {103}));
  qagg::AggregationConfig cfg;
  cfg.exact_expectation = true;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 9);
    std::vector<encode::EncodedAngle> angles;
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      angles.emplace_back(rng.uniform() * encode::kHalfPi);
      mean += angles.back().value() / static_cast<double>(n);
    }
    const auto run = qagg::run_plan(qagg::build_plan(angles, n), qcore::NoiseModel::noiseless(),
                                    qagg::Sampling::exact(), rng);
    worst = std::max(worst, std::abs(run.raw_value.value() - mean));
  }
  return {"aggregation_linearity", worst < 1e-9, "max |aggregate - mean| = " + num(worst)};
}

inline CheckResult check_noise_deviation(const SuiteOptions&) {
  const auto plus = encode::encode(encode::EncodedAngle(std::numbers::pi / 4.0));
  double worst = 0.0;
  for (double p : {0.01, 0.05, 0.1, 0.3}) {
    worst = std::max(worst, std::abs(qagg::noise_deviation(plus, qcore::dephasing_channel(p)) - p));
    worst = std::max(worst, std::abs(qagg::noise_deviation(plus, qcore::depolarizing_channel(p)) - 2.0 * p / 3.0));
  }
  return {"noise_deviation", worst < 1e-9, "max deviation from closed form " + num(worst)};
}

/// Calibrates sigma_gate on a fixed (S, d, N) grid, then checks the bound on
/// randomized configurations.
struct VarianceSuiteResult {
  double sigma_gate = 0.0;
  double violation_rate = 0.0;
  double shot_ratio = 0.0;
};

inline VarianceSuiteResult run_variance_suite(const SuiteOptions& opt) {
  qcore::NoiseModel noise = opt.noise;
  noise.rotation_jitter = opt.gate_jitter;
  RngStream calib_rng(derive_seed(opt.seed, {104}));
  std::vector<qagg::VarianceSample> sweep;
  for (std::uint64_t s : {256ULL, 1024ULL, 4096ULL, 16384ULL, 65536ULL})
    for (std::size_t d : {1U, 5U, 9U})
      for (std::size_t n : {1U, 5U, 9U})
        sweep.push_back(qagg::measure_variance(s, d, n, noise, opt.variance_trials, calib_rng));
  VarianceSuiteResult out;
  out.sigma_gate = qagg::fit_sigma_gate(sweep, opt.sigma_shot);

  RngStream rng(derive_seed(opt.seed, {105}));
  std::size_t violations = 0;
  qagg::AggregationConfig cfg;
  cfg.sigma_shot = opt.sigma_shot;
  cfg.sigma_gate = out.sigma_gate;
  for (std::size_t i = 0; i < opt.variance_configs; ++i) {
    const auto shots = static_cast<std::uint64_t>(std::round(std::exp2(8.0 + 8.0 * rng.uniform())));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 9.0) % 9;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 9.0) % 9;
    const auto v = qagg::measure_variance(shots, d, n, noise, opt.variance_trials, rng);
    cfg.shots = shots;
    if (v.empirical > qagg::variance_bound(cfg, n, d)) ++violations;
  }
  out.violation_rate = static_cast<double>(violations) / static_cast<double>(opt.variance_configs);

  // Shot scaling without jitter: variance should drop 4x for 4x shots.
  RngStream ratio_rng(derive_seed(opt.seed, {106}));
  std::vector<encode::EncodedAngle> angles{encode::EncodedAngle(0.3), encode::EncodedAngle(0.9),
                                           encode::EncodedAngle(1.2)};
  const auto plan = qagg::build_plan(angles, angles.size());
  const double v1 = qagg::empirical_variance(plan, opt.noise, qagg::Sampling::with_shots(1024), 2000, ratio_rng);
  const double v4 = qagg::empirical_variance(plan, opt.noise, qagg::Sampling::with_shots(4096), 2000, ratio_rng);
  out.shot_ratio = v1 / v4;
  return out;
}

inline std::vector<CheckResult> check_variance_bound(const SuiteOptions& opt) {
  const auto r = run_variance_suite(opt);
  return {
      {"variance_bound_soundness", r.violation_rate <= 0.05,
       "violation rate " + num(r.violation_rate) + " (limit 0.05), calibrated sigma_gate " +
           num(r.sigma_gate)},
      {"variance_shot_scaling", r.shot_ratio >= 3.0 && r.shot_ratio <= 5.0,
       "Var(S=1024)/Var(S=4096) = " + num(r.shot_ratio)},
  };
}

inline CheckResult check_commutation(const SuiteOptions& opt) {
  RngStream rng(derive_seed(opt.seed, {107}));
  double worst_deph = 0.0;
  double worst_depol = 0.0;
  const auto z = qcore::Observable::pauli_z();
  for (int i = 0; i < 100; ++i) {
    const auto rho = i % 2 == 0 ? random_pure_state(1, rng) : random_mixed_state(1, rng);
    const double p = 0.01 + 0.98 * rng.uniform();
    const auto deph = qagg::commutation_check(qcore::dephasing_channel(p), z, rho);
    worst_deph = std::max(worst_deph, std::abs(deph.lhs - deph.rhs));
    const auto depol = qagg::commutation_check(qcore::depolarizing_channel(p), z, rho);
    worst_depol = std::max(worst_depol, std::abs((depol.lhs - depol.rhs) - 4.0 * p / 3.0 * depol.lhs));
  }
  return {"commutation", worst_deph < 1e-10 && worst_depol < 1e-9,
          "dephasing |lhs-rhs| max " + num(worst_deph) + ", depolarizing violation error max " +
              num(worst_depol)};
}

inline CheckResult check_mitigation(const SuiteOptions& opt) {
  const qcore::NoiseModel depol{opt.noise.p_depol, 0.0, 0.0, 0.0, 0.0};
  double worst_exact = 0.0;
  double min_raw = 1.0;
  RngStream rng(derive_seed(opt.seed, {108}));
  for (int i = 0; i <= 20; ++i) {
    const double mean = 0.2 + 1.0 * i / 20.0;
    const std::vector<encode::EncodedAngle> angles{encode::EncodedAngle(mean - 0.1), encode::EncodedAngle(mean),
                                                   encode::EncodedAngle(mean + 0.1)};
    const auto plan = qagg::build_plan(angles, 3);
    const auto run = qagg::run_plan(plan, depol, qagg::Sampling::exact(), rng);
    const double z = qagg::mitigate_channel_inversion(run.z(), depol, plan.depth());
    worst_exact = std::max(worst_exact, std::abs(encode::angle_from_z(z).value() - mean));
    min_raw = std::min(min_raw, std::abs(run.raw_value.value() - mean));
  }
  std::size_t good = 0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream s(derive_seed(opt.seed, {109, static_cast<std::uint64_t>(seed)}));
    const double mean = 0.2 + 1.0 * s.uniform();
    const std::vector<encode::EncodedAngle> angles{encode::EncodedAngle(mean), encode::EncodedAngle(mean)};
    const auto plan = qagg::build_plan(angles, 2);
    const auto run = qagg::run_plan(plan, depol, qagg::Sampling::with_shots(100000), s);
    const double z = qagg::mitigate_channel_inversion(run.z(), depol, plan.depth());
    if (std::abs(encode::angle_from_z(z).value() - mean) < 0.02) ++good;
  }
  return {"mitigation_efficacy", worst_exact < 1e-6 && min_raw > 0.0 && good >= 95,
          "exact mitigated error max " + num(worst_exact) + ", raw error min " + num(min_raw) +
              ", sampled within 0.02 rad: " + std::to_string(good) + "/100"};
}

inline CheckResult check_selection_fairness(const SuiteOptions& opt) {
  const std::size_t n = 5, m = 3, rounds = 10000;
  const double threshold = qselect::chi_square_quantile(qselect::binomial_coefficient(n, m) - 1, 0.99);
  std::size_t passing = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    qselect::VonNeumannExtractor bits(
        qselect::QuantumEntropySource(opt.noise, RngStream(derive_seed(opt.seed, {110, seed}))));
    std::vector<qselect::SelectionVector> history;
    history.reserve(rounds);
    for (std::size_t t = 0; t < rounds; ++t) history.push_back(qselect::select_clients(n, m, bits, t));
    if (qselect::subset_fairness(history, n, m).chi_square < threshold) ++passing;
  }
  return {"selection_fairness", passing >= 95,
          std::to_string(passing) + "/100 seeds below chi-square 99th percentile " + num(threshold)};
}

/// Runs every invariant check in order.
inline std::vector<CheckResult> run_suite(const SuiteOptions& opt) {
  std::vector<CheckResult> results;
  results.push_back(check_cptp(opt));
  results.push_back(check_depolarizing_contraction(opt));
  results.push_back(check_encode_round_trip(opt));
  results.push_back(check_linearity(opt));
  results.push_back(check_noise_deviation(opt));
  for (auto& r : check_variance_bound(opt)) results.push_back(std::move(r));
  results.push_back(check_commutation(opt));
  results.push_back(check_mitigation(opt));
  results.push_back(check_selection_fairness(opt));
  return results;
}

}  // namespace nrqfl::validation
