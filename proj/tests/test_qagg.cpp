#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "nrqfl/qagg.hpp"
#include "nrqfl/validation.hpp"

namespace {

using namespace nrqfl;
using namespace nrqfl::qagg;
using encode::EncodedAngle;

constexpr double kLambda3 = 0.8130370370370371;  // (1 - 4*0.05/3)^3

std::vector<EncodedAngle> angles_of(std::initializer_list<double> xs) {
  std::vector<EncodedAngle> out;
  for (double x : xs) out.emplace_back(x);
  return out;
}

double mean_of(const std::vector<EncodedAngle>& a) {
  double s = 0.0;
  for (auto x : a) s += x.value();
  return s / static_cast<double>(a.size());
}

std::vector<EncodedAngle> random_angles(std::size_t n, RngStream& rng) {
  std::vector<EncodedAngle> a;
  for (std::size_t k = 0; k < n; ++k) a.emplace_back(rng.uniform() * encode::kHalfPi);
  return a;
}

AggregationConfig exact_config(MitigationFlags flags = MitigationFlags::none()) {
  AggregationConfig cfg;
  cfg.exact_expectation = true;
  cfg.mitigation = flags;
  return cfg;
}

TEST(BuildPlan, Examples) {
  RngStream rng(1);
  const auto three = angles_of({0.2, 0.4, 0.6});
  const auto plan = build_plan(three, 3);
  ASSERT_EQ(plan.depth(), 3u);
  EXPECT_NEAR(plan.rotations[0], 0.4 / 3.0, 1e-15);
  EXPECT_NEAR(plan.rotations[1], 0.8 / 3.0, 1e-15);
  EXPECT_NEAR(plan.rotations[2], 0.4, 1e-15);
  EXPECT_NEAR(run_plan(plan, {}, Sampling::exact(), rng).raw_value.value(), 0.4, 1e-12);

  const auto single = build_plan(angles_of({0.7}), 1);
  EXPECT_NEAR(single.rotations[0], 1.4, 1e-15);
  EXPECT_NEAR(run_plan(single, {}, Sampling::exact(), rng).raw_value.value(), 0.7, 1e-12);

  EXPECT_NEAR(run_plan(build_plan(angles_of({0.1, 0.9}), 2), {}, Sampling::exact(), rng).raw_value.value(), 0.5,
              1e-12);
}

TEST(BuildPlan, RejectsBadInput) {
  const auto a = angles_of({0.1, 0.2});
  EXPECT_THROW(build_plan(a, 0), std::invalid_argument);
  EXPECT_THROW(build_plan(a, 3), std::invalid_argument);
  std::vector<EncodedAngle> ten(10, EncodedAngle(0.1));
  EXPECT_THROW(build_plan(ten, 10), std::invalid_argument);
  EXPECT_THROW(build_plan_with_depth(a, 0), std::invalid_argument);
  EXPECT_THROW(build_plan_with_depth(a, 10), std::invalid_argument);
}

TEST(BuildPlan, ExplicitDepthPreservesNoiselessMean) {
  RngStream rng(2);
  for (std::size_t n = 1; n <= 9; ++n) {
    const auto a = random_angles(n, rng);
    for (std::size_t d = 1; d <= 9; ++d) {
      const auto plan = build_plan_with_depth(a, d);
      EXPECT_EQ(plan.depth(), d);
      EXPECT_NEAR(run_plan(plan, {}, Sampling::exact(), rng).raw_value.value(), mean_of(a), 1e-10);
    }
  }
}

TEST(RunPlan, NoiselessExactIsMean) {
  RngStream rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_angles(1 + static_cast<std::size_t>(i % 9), rng);
    EXPECT_NEAR(run_plan(build_plan(a, a.size()), {}, Sampling::exact(), rng).raw_value.value(), mean_of(a), 1e-10);
  }
}

TEST(RunPlan, DepolarizingAttenuationMatchesOracle) {
  RngStream rng(4);
  const auto a = angles_of({0.2, 0.4, 0.6});
  const qcore::NoiseModel noise{0.05, 0.0, 0.0, 0.0, 0.0};
  const auto run = run_plan(build_plan(a, 3), noise, Sampling::exact(), rng);
  EXPECT_NEAR(run.z(), kLambda3 * std::cos(0.8), 1e-12);
  const double oracle = std::asin(std::sqrt((1.0 - kLambda3 * std::cos(2.0 * 0.4)) / 2.0));
  EXPECT_NEAR(run.raw_value.value(), oracle, 1e-12);
  EXPECT_NEAR(oracle, 0.48430331159301476, 1e-14);
}

TEST(RunPlan, SeedsGiveDifferentCountsWithinEnvelope) {
  const auto plan = build_plan(angles_of({0.3, 0.5, 1.1}), 3);
  const qcore::NoiseModel noise{0.05, 0.01, 0.03, 0.01, 0.0};
  RngStream a(10), b(11);
  const auto ra = run_plan(plan, noise, Sampling::with_shots(100000), a);
  const auto rb = run_plan(plan, noise, Sampling::with_shots(100000), b);
  EXPECT_NE(ra.counts, rb.counts);
  const double p = ra.p1_true;
  const double sigma = std::sqrt(p * (1.0 - p) / 1e5);
  EXPECT_LT(std::abs(ra.p1_observed - rb.p1_observed), 4.0 * std::sqrt(2.0) * sigma);
}

TEST(Mitigation, ChannelInversionExamples) {
  const qcore::NoiseModel none{};
  EXPECT_DOUBLE_EQ(mitigate_channel_inversion(0.37, none, 3), 0.37);
  const qcore::NoiseModel noise{0.05, 0.0, 0.0, 0.0, 0.0};
  for (double z : {-0.9, -0.2, 0.0, 0.5, 0.8}) EXPECT_NEAR(mitigate_channel_inversion(kLambda3 * z, noise, 3), z, 1e-9);
  EXPECT_DOUBLE_EQ(mitigate_channel_inversion(1.0, noise, 3), 1.0);
  EXPECT_DOUBLE_EQ(mitigate_channel_inversion(-1.0, noise, 3), -1.0);
  EXPECT_THROW(mitigate_channel_inversion(0.1, qcore::NoiseModel{0.75, 0, 0, 0, 0}, 1), std::domain_error);
  EXPECT_THROW(mitigate_channel_inversion(0.1, qcore::NoiseModel{0.7, 0, 0, 0, 0}, 9), std::domain_error);
}

TEST(Mitigation, CalibrationExamples) {
  RngStream rng(5);
  const auto& probes = default_probe_angles();
  const auto ideal = calibrate({}, 3, probes, Sampling::exact(), rng);
  EXPECT_NEAR(ideal.attenuation, 1.0, 1e-12);
  EXPECT_NEAR(ideal.offset, 0.0, 1e-12);

  const auto depol = calibrate(qcore::NoiseModel{0.05, 0, 0, 0, 0}, 3, probes, Sampling::exact(), rng);
  EXPECT_NEAR(depol.attenuation, kLambda3, 1e-12);
  EXPECT_NEAR(depol.offset, 0.0, 1e-12);

  const auto damp = calibrate(qcore::NoiseModel{0, 0, 0.03, 0, 0}, 3, probes, Sampling::exact(), rng);
  EXPECT_GT(damp.offset, 0.0);
}

TEST(Mitigation, CalibrationRejectsBadInput) {
  RngStream rng(6);
  const std::vector<double> one{0.3};
  const std::vector<double> same{0.3, 0.3};
  EXPECT_THROW(calibrate({}, 3, one, Sampling::exact(), rng), std::invalid_argument);
  EXPECT_THROW(calibrate({}, 3, same, Sampling::exact(), rng), std::invalid_argument);
  EXPECT_THROW(calibrate({}, 0, default_probe_angles(), Sampling::exact(), rng), std::invalid_argument);
  EXPECT_THROW(calibrate(qcore::NoiseModel{0.75, 0, 0, 0, 0}, 2, default_probe_angles(), Sampling::exact(), rng),
               std::domain_error);
}

TEST(Mitigation, ReducesAttenuationBias) {
  RngStream rng(7);
  const qcore::NoiseModel noise{0.05, 0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 500; ++i) {
    const auto a = random_angles(1 + static_cast<std::size_t>(i % 9), rng);
    const double m = mean_of(a);
    if (std::abs(m - std::numbers::pi / 4.0) < 1e-9) continue;  // cos(2m) = 0: no bias to remove
    const auto run = run_plan(build_plan(a, a.size()), noise, Sampling::exact(), rng);
    const double mitigated = encode::angle_from_z(mitigate_channel_inversion(run.z(), noise, a.size())).value();
    EXPECT_LT(std::abs(mitigated - m), std::abs(run.raw_value.value() - m));
  }
}

TEST(Aggregate, Examples) {
  const std::vector<std::vector<double>> clients{{1.0, 2.0}, {3.0, 4.0}};
  const std::vector<encode::WeightBounds> bounds{{0.0, 5.0}, {0.0, 5.0}};
  const auto r = aggregate(clients, bounds, exact_config(), {}, 1);
  EXPECT_NEAR(r.values[0], 2.0, 1e-9);
  EXPECT_NEAR(r.values[1], 3.0, 1e-9);
  EXPECT_EQ(r.clipped, 0u);
}

TEST(Aggregate, IdenticalClientsUnderMitigatedNoise) {
  // Values stay off the bound edges: at angle 0 or pi/2 the count statistics
  // carry almost no information about the angle.
  const std::vector<double> v{0.3, -0.5, 0.8, -0.8, 0.0};
  const std::vector<std::vector<double>> clients(5, v);
  const std::vector<encode::WeightBounds> bounds(v.size(), encode::WeightBounds(-1.0, 1.0));
  AggregationConfig cfg;
  cfg.shots = 100000;
  cfg.repeats = 4;
  cfg.mitigation = MitigationFlags::all();
  for (const auto& noise : {qcore::NoiseModel{0.05, 0.0, 0.03, 0.0, 0.0}, qcore::NoiseModel{0.05, 0.02, 0.03, 0.01, 0.0}})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = aggregate(clients, bounds, cfg, noise, seed);
      for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(r.values[j], v[j], 0.02);
    }
}

TEST(Mitigation, ResponseTableRemovesDampingBias) {
  // Exact expectations, so the only error left is model mismatch.
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  const std::vector<encode::WeightBounds> bounds{{-1.0, 1.0}};
  AggregationConfig table;
  table.exact_expectation = true;
  table.mitigation.calibration = true;
  AggregationConfig affine = table;
  affine.probe_angles = {0.15, 1.4};  // two probes: affine fit only
  double worst_table = 0.0, worst_affine = 0.0;
  for (double x = -0.9; x <= 0.9; x += 0.05) {
    const std::vector<std::vector<double>> clients(5, std::vector<double>{x});
    worst_table = std::max(worst_table, std::abs(aggregate(clients, bounds, table, noise, 1).values[0] - x));
    worst_affine = std::max(worst_affine, std::abs(aggregate(clients, bounds, affine, noise, 1).values[0] - x));
  }
  EXPECT_LT(worst_table, 0.005);
  EXPECT_LT(worst_table, 0.5 * worst_affine) << worst_table << " vs " << worst_affine;
}

TEST(Aggregate, TwelveClientsSplitIntoNineAndThree) {
  EXPECT_EQ(split_groups(12), (std::vector<std::size_t>{9, 3}));
  EXPECT_EQ(split_groups(9), (std::vector<std::size_t>{9}));
  EXPECT_EQ(split_groups(20), (std::vector<std::size_t>{9, 9, 2}));
  RngStream rng(8);
  std::vector<std::vector<double>> clients;
  double mean = 0.0;
  for (int i = 0; i < 12; ++i) {
    clients.push_back({rng.uniform() * 2.0 - 1.0});
    mean += clients.back()[0] / 12.0;
  }
  const std::vector<encode::WeightBounds> bounds{{-1.0, 1.0}};
  const auto r = aggregate(clients, bounds, exact_config(), {}, 3);
  EXPECT_EQ(r.group_sizes, (std::vector<std::size_t>{9, 3}));
  EXPECT_NEAR(r.values[0], mean, 1e-9);
}

TEST(Aggregate, NoiselessLinearityProperty) {
  RngStream rng(9);
  const std::vector<encode::WeightBounds> bounds{{0.0, encode::kHalfPi}};
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 9);
    std::vector<std::vector<double>> clients;
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      clients.push_back({rng.uniform() * encode::kHalfPi});
      mean += clients.back()[0];
    }
    mean /= static_cast<double>(n);
    EXPECT_NEAR(aggregate(clients, bounds, exact_config(), {}, 0).estimates[0].value, mean, 1e-9);
  }
}

TEST(Aggregate, ResultIndependentOfBatching) {
  RngStream rng(10);
  std::vector<std::vector<double>> clients(4, std::vector<double>(13));
  for (auto& c : clients)
    for (auto& x : c) x = rng.normal();
  const std::vector<encode::WeightBounds> bounds(13, encode::WeightBounds(-3.0, 3.0));
  const qcore::NoiseModel noise{0.05, 0.02, 0.03, 0.01, 0.02};
  AggregationConfig cfg;
  cfg.mitigation = MitigationFlags::all();
  cfg.repeats = 3;
  const auto one = aggregate(clients, bounds, cfg, noise, 77);
  for (std::size_t batch : {2u, 5u, 6u}) {
    cfg.max_qubits_per_batch = batch;
    const auto other = aggregate(clients, bounds, cfg, noise, 77);
    for (std::size_t j = 0; j < 13; ++j) EXPECT_NEAR(other.values[j], one.values[j], 1e-12) << batch << " " << j;
  }
}

TEST(Aggregate, DeterministicPerSeed) {
  const std::vector<std::vector<double>> clients{{0.1, 0.2}, {0.4, -0.3}, {0.0, 0.9}};
  const std::vector<encode::WeightBounds> bounds(2, encode::WeightBounds(-1.0, 1.0));
  AggregationConfig cfg;
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  EXPECT_EQ(aggregate(clients, bounds, cfg, noise, 5).values, aggregate(clients, bounds, cfg, noise, 5).values);
  EXPECT_NE(aggregate(clients, bounds, cfg, noise, 5).values, aggregate(clients, bounds, cfg, noise, 6).values);
}

TEST(Aggregate, CountsClippedValues) {
  const std::vector<std::vector<double>> clients{{-2.0}, {0.5}, {3.0}};
  const std::vector<encode::WeightBounds> bounds{{-1.0, 1.0}};
  EXPECT_EQ(aggregate(clients, bounds, exact_config(), {}, 0).clipped, 2u);
}

TEST(Aggregate, RejectsBadInput) {
  const std::vector<encode::WeightBounds> bounds{{-1.0, 1.0}};
  const std::vector<std::vector<double>> none;
  EXPECT_THROW(aggregate(none, bounds, exact_config(), {}, 0), std::invalid_argument);
  const std::vector<std::vector<double>> ragged{{0.0}, {0.0, 1.0}};
  EXPECT_THROW(aggregate(ragged, bounds, exact_config(), {}, 0), std::invalid_argument);
  const std::vector<std::vector<double>> two{{0.0, 0.1}};
  EXPECT_THROW(aggregate(two, bounds, exact_config(), {}, 0), std::invalid_argument);
  AggregationConfig bad;
  bad.max_qubits_per_batch = 7;
  const std::vector<std::vector<double>> one{{0.0}};
  EXPECT_THROW(aggregate(one, bounds, bad, {}, 0), std::invalid_argument);
}

TEST(Aggregate, RawValueShowsUncorrectedBias) {
  const std::vector<std::vector<double>> clients{{0.2}, {0.4}, {0.6}};
  const std::vector<encode::WeightBounds> bounds{{0.0, encode::kHalfPi}};
  const qcore::NoiseModel noise{0.05, 0.0, 0.0, 0.0, 0.0};
  MitigationFlags flags;
  flags.channel_inversion = true;
  const auto r = aggregate(clients, bounds, exact_config(flags), noise, 0);
  EXPECT_NEAR(r.estimates[0].raw_value, 0.48430331159301476, 1e-12);
  EXPECT_NEAR(r.estimates[0].value, 0.4, 1e-12);
  EXPECT_NEAR(r.ideal_angles[0], 0.4, 1e-15);
}

TEST(Replicated, SingleServerMatchesAggregate) {
  const std::vector<std::vector<double>> clients{{0.1, 0.2}, {0.4, -0.3}};
  const std::vector<encode::WeightBounds> bounds(2, encode::WeightBounds(-1.0, 1.0));
  const AggregationConfig cfg;
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  EXPECT_EQ(replicated_aggregate(clients, bounds, cfg, noise, 1, 42).values,
            aggregate(clients, bounds, cfg, noise, 42).values);
  EXPECT_THROW(replicated_aggregate(clients, bounds, cfg, noise, 0, 42), std::invalid_argument);
}

TEST(Replicated, MedianResistsOneTamperedServer) {
  const std::vector<std::vector<double>> clients{{0.1, 0.2}, {0.4, -0.3}, {0.2, 0.0}};
  const std::vector<encode::WeightBounds> bounds(2, encode::WeightBounds(-1.0, 1.0));
  AggregationConfig cfg;
  cfg.shots = 1024;
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  std::vector<std::vector<double>> honest;
  const auto record = [&](std::size_t, AggregationResult& r) { honest.push_back(r.values); };
  replicated_aggregate(clients, bounds, cfg, noise, 5, 9, record);
  const auto tampered = replicated_aggregate(clients, bounds, cfg, noise, 5, 9, [](std::size_t s, AggregationResult& r) {
    if (s == 2)
      for (auto& v : r.values) v += 1000.0;
  });
  for (std::size_t j = 0; j < 2; ++j) {
    double lo = 1e9, hi = -1e9;
    for (const auto& h : honest) {
      lo = std::min(lo, h[j]);
      hi = std::max(hi, h[j]);
    }
    EXPECT_GE(tampered.values[j], lo);
    EXPECT_LE(tampered.values[j], hi);
  }
}

TEST(Replicated, ThreeServersReduceVariance) {
  const std::vector<std::vector<double>> clients{{0.1}, {0.5}, {0.3}};
  const std::vector<encode::WeightBounds> bounds{{-1.0, 1.0}};
  AggregationConfig cfg;
  cfg.shots = 512;
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  const auto variance = [&](std::size_t servers) {
    double mean = 0.0, m2 = 0.0;
    for (std::uint64_t t = 0; t < 400; ++t) {
      const double x = replicated_aggregate(clients, bounds, cfg, noise, servers, derive_seed(3, {t})).values[0];
      const double d = x - mean;
      mean += d / static_cast<double>(t + 1);
      m2 += d * (x - mean);
    }
    return m2 / 399.0;
  };
  EXPECT_LE(variance(3), variance(1));
}

TEST(Diagnostics, VarianceBoundExamples) {
  AggregationConfig cfg;
  cfg.sigma_shot = 0.5;
  cfg.sigma_gate = 0.02;
  cfg.shots = 1024;
  EXPECT_NEAR(variance_bound(cfg, 5, 5), 4.48828125e-4, 1e-15);
  cfg.sigma_gate = 0.0;
  cfg.shots = std::uint64_t{1} << 60;
  EXPECT_LT(variance_bound(cfg, 3, 3), 1e-18);
  cfg.shots = 1000;
  const double a = variance_bound(cfg, 4, 4);
  cfg.shots = 2000;
  EXPECT_NEAR(variance_bound(cfg, 4, 4), a / 2.0, 1e-18);
}

TEST(Diagnostics, EmpiricalVarianceExamples) {
  RngStream rng(12);
  const auto plan = build_plan(angles_of({0.3, 0.9, 1.2}), 3);
  EXPECT_EQ(empirical_variance(plan, qcore::NoiseModel{0.05, 0, 0.03, 0, 0}, Sampling::exact(), 10, rng), 0.0);
  EXPECT_THROW(empirical_variance(plan, {}, Sampling::exact(), 1, rng), std::invalid_argument);

  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  const double v1 = empirical_variance(plan, noise, Sampling::with_shots(1000), 500, rng);
  const double v4 = empirical_variance(plan, noise, Sampling::with_shots(4000), 500, rng);
  EXPECT_GT(v1 / v4, 4.0 * 0.7);
  EXPECT_LT(v1 / v4, 4.0 * 1.3);
}

TEST(Diagnostics, VarianceGrowsWithDepthUnderGateNoise) {
  RngStream rng(13);
  const qcore::NoiseModel noise{0.0, 0.0, 0.0, 0.0, 0.05};
  const auto angles = angles_of({0.5, 0.8, 0.6});
  double prev = 0.0;
  for (std::size_t d : {1u, 3u, 5u, 7u, 9u}) {
    const double v = empirical_variance(build_plan_with_depth(angles, d), noise, Sampling::with_shots(4096), 4000, rng);
    EXPECT_GT(v, prev) << d;
    prev = v;
  }
}

TEST(Diagnostics, ChannelAttenuationShrinksRawVarianceAtDepth) {
  // Depolarizing plus damping pulls the raw estimator toward pi/4, so the
  // unmitigated variance peaks and then falls with depth.
  RngStream rng(14);
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.05};
  const auto angles = angles_of({0.5, 0.8, 0.6});
  const auto var = [&](std::size_t d) {
    return empirical_variance(build_plan_with_depth(angles, d), noise, Sampling::exact(), 4000, rng);
  };
  EXPECT_GT(var(3), var(1));
  EXPECT_LT(var(9), var(5));
}

TEST(Diagnostics, CommutationExamples) {
  RngStream rng(14);
  const auto z = qcore::Observable::pauli_z();
  for (int i = 0; i < 20; ++i) {
    const auto rho = validation::random_mixed_state(1, rng);
    EXPECT_TRUE(commutation_check(qcore::dephasing_channel(rng.uniform()), z, rho).holds);
    EXPECT_TRUE(commutation_check(qcore::KrausChannel::identity(), qcore::Observable::pauli_x(), rho).holds);
  }
  const auto r = commutation_check(qcore::depolarizing_channel(0.05), z, qcore::DensityMatrix::ground(1));
  EXPECT_FALSE(r.holds);
  EXPECT_NEAR(r.lhs, 1.0, 1e-15);
  EXPECT_NEAR(r.rhs, 1.0 - 4.0 * 0.05 / 3.0, 1e-12);
  EXPECT_THROW(commutation_check(qcore::KrausChannel::identity(), z, qcore::DensityMatrix::ground(2)),
               std::invalid_argument);
}

TEST(Diagnostics, NoiseDeviationExamples) {
  RngStream rng(15);
  const auto rho = validation::random_mixed_state(1, rng);
  EXPECT_NEAR(noise_deviation(rho, qcore::KrausChannel::identity()), 0.0, 1e-15);
  const auto plus = encode::encode(EncodedAngle(std::numbers::pi / 4.0));
  for (double p : {0.01, 0.1, 0.3, 0.5}) {
    EXPECT_NEAR(noise_deviation(plus, qcore::dephasing_channel(p)), p, 1e-12);
    const auto pure = validation::random_pure_state(1, rng);
    EXPECT_NEAR(noise_deviation(pure, qcore::depolarizing_channel(p)), 2.0 * p / 3.0, 1e-12);
  }
}

TEST(Diagnostics, RoundNoiseDeviationMatchesEigenOracle) {
  const qcore::NoiseModel noise{0.05, 0.02, 0.03, 0.0, 0.0};
  const auto ch = noise.composite_channel();
  RngStream rng(16);
  std::vector<double> angles;
  for (int i = 0; i < 20; ++i) angles.push_back(rng.uniform() * encode::kHalfPi);
  double oracle = 0.0;
  for (double a : angles) {
    Eigen::Vector2cd psi(std::cos(a), std::sin(a));
    Eigen::Matrix2cd rho = psi * psi.adjoint();
    Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
    for (const auto& op : ch.operators()) {
      Eigen::Matrix2cd k;
      k << op(0, 0), op(0, 1), op(1, 0), op(1, 1);
      out += k * rho * k.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> solver(rho - out);
    oracle = std::max(oracle, 0.5 * solver.eigenvalues().cwiseAbs().sum());
  }
  EXPECT_NEAR(round_noise_deviation(angles, noise), oracle, 1e-9);
}

TEST(Diagnostics, FittedSigmaGateCoversCalibrationSweep) {
  RngStream rng(17);
  const qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.02};
  std::vector<VarianceSample> sweep;
  for (std::uint64_t s : {256u, 4096u})
    for (std::size_t d : {1u, 9u}) sweep.push_back(measure_variance(s, d, 3, noise, 200, rng));
  AggregationConfig cfg;
  cfg.sigma_gate = fit_sigma_gate(sweep, 0.5);
  EXPECT_GT(cfg.sigma_gate, 0.0);
  for (const auto& v : sweep) {
    cfg.shots = v.shots;
    EXPECT_LE(v.empirical, variance_bound(cfg, v.n_clients, v.depth) + 1e-15);
  }
}

}  // namespace
