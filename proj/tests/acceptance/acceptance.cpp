// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrqfl/flsim.hpp"
#include "nrqfl/qagg.hpp"
#include "nrqfl/qselect.hpp"
#include "nrqfl/validation.hpp"

namespace {

using namespace nrqfl;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Eigen::MatrixXcd to_eigen(const qcore::ComplexMatrix& m) {
  Eigen::MatrixXcd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

double min_eigenvalue(const qcore::ComplexMatrix& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(to_eigen(m)).eigenvalues().minCoeff();
}

double oracle_trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return 0.5 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(a - b).eigenvalues().cwiseAbs().sum();
}

Outcome ac1_cptp() {
  const auto t0 = Clock::now();
  double worst_completeness = 0.0;
  for (double p : validation::probability_grid())
    for (const auto& ch : {qcore::depolarizing_channel(p), qcore::dephasing_channel(p),
                           qcore::amplitude_damping_channel(p)})
      worst_completeness = std::max(worst_completeness, ch.completeness_error());
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  RngStream rng(derive_seed(2024, {1}));
  for (int seed = 0; seed < 1000; ++seed) {
    RngStream s = rng.derive({static_cast<std::uint64_t>(seed)});
    const std::size_t n = 1 + static_cast<std::size_t>(seed % 3);
    const auto rho = seed % 2 == 0 ? validation::random_pure_state(n, s) : validation::random_mixed_state(n, s);
    const double p = s.uniform();
    for (const auto& ch : {qcore::depolarizing_channel(p), qcore::dephasing_channel(p),
                           qcore::amplitude_damping_channel(p)}) {
      const auto out = qcore::apply_channel(rho, ch, static_cast<std::size_t>(seed) % n);
      worst_trace = std::max(worst_trace, std::abs(out.matrix().trace() - qcore::Complex(1.0, 0.0)));
      worst_eig = std::min(worst_eig, min_eigenvalue(out.matrix()));
    }
  }
  const double t = seconds_since(t0);
  return {worst_completeness < 1e-10 && worst_trace < 1e-10 && worst_eig >= -1e-9 && t < 10.0,
          "completeness " + num(worst_completeness) + ", |Tr-1| " + num(worst_trace) + ", min eig " + num(worst_eig) +
              " over 1000 states, " + num(t) + " s"};
}

Outcome ac2_round_trip() {
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = encode::kHalfPi * i / 999.0;
    worst = std::max(worst, std::abs(encode::decode_exact(encode::encode(encode::EncodedAngle(a))).value() - a));
  }
  return {worst < 1e-12, "max error " + num(worst) + " on 1000 angles"};
}

Outcome ac3_linearity() {
  const auto t0 = Clock::now();
  RngStream rng(derive_seed(2024, {3}));
  qagg::AggregationConfig cfg;
  cfg.exact_expectation = true;
  const std::vector<encode::WeightBounds> bounds{{0.0, encode::kHalfPi}};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 9);
    std::vector<std::vector<double>> clients;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      clients.push_back({rng.uniform() * encode::kHalfPi});
      sum += clients.back()[0];
    }
    const double got = qagg::aggregate(clients, bounds, cfg, {}, static_cast<std::uint64_t>(i)).values[0];
    worst = std::max(worst, std::abs(got - sum / static_cast<double>(n)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 30.0, "max |aggregate - mean| " + num(worst) + ", " + num(t) + " s"};
}

Outcome ac4_noise_bound() {
  flsim::ExperimentSettings settings;
  double worst = 0.0;
  std::size_t rounds = 0;
  for (auto strategy : {flsim::Strategy::kQfl, flsim::Strategy::kNrQfl}) {
    const auto channel = settings.noise.composite_channel();
    for (const auto& r : flsim::run_experiment(settings, strategy)) {
      double oracle = 0.0;
      for (double a : r.ideal_angles) {
        Eigen::Vector2cd psi(std::cos(a), std::sin(a));
        const Eigen::Matrix2cd rho = psi * psi.adjoint();
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2, 2);
        for (const auto& k : channel.operators()) out += to_eigen(k) * rho * to_eigen(k).adjoint();
        oracle = std::max(oracle, oracle_trace_distance(rho, out));
      }
      worst = std::max(worst, std::abs(r.noise_deviation - oracle));
      ++rounds;
    }
  }
  double worst_deph = 0.0;
  const auto plus = encode::encode(encode::EncodedAngle(encode::kHalfPi / 2.0));
  for (double p : validation::probability_grid())
    worst_deph = std::max(worst_deph, std::abs(qagg::noise_deviation(plus, qcore::dephasing_channel(p)) - p));
  return {worst < 1e-9 && worst_deph < 1e-12,
          "max |reported - oracle| " + num(worst) + " over " + std::to_string(rounds) +
              " rounds; dephasing on |+> max |D - p| " + num(worst_deph)};
}

Outcome ac5_variance_bound() {
  const auto t0 = Clock::now();
  validation::SuiteOptions opt;
  opt.seed = 2024;
  const auto r = validation::run_variance_suite(opt);
  const double t = seconds_since(t0);
  return {r.violation_rate <= 0.05 && r.shot_ratio >= 3.0 && r.shot_ratio <= 5.0 && t < 300.0,
          "bound holds in " + num(100.0 * (1.0 - r.violation_rate)) + "% of 1000 configs (sigma_gate " +
              num(r.sigma_gate) + "), variance ratio for 4x shots " + num(r.shot_ratio) + ", " + num(t) + " s"};
}

Outcome ac6_commutation() {
  RngStream rng(derive_seed(2024, {6}));
  const auto z = qcore::Observable::pauli_z();
  double worst_deph = 0.0;
  double worst_depol = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto rho = i % 2 == 0 ? validation::random_pure_state(1, rng) : validation::random_mixed_state(1, rng);
    const double p = rng.uniform();
    const auto deph = qagg::commutation_check(qcore::dephasing_channel(p), z, rho);
    if (!deph.holds) worst_deph = std::max(worst_deph, 1.0);
    worst_deph = std::max(worst_deph, std::abs(deph.lhs - deph.rhs));
    const auto depol = qagg::commutation_check(qcore::depolarizing_channel(p), z, rho);
    const double z_expect = (to_eigen(rho.matrix()) * to_eigen(qcore::gates::pauli_z())).trace().real();
    worst_depol = std::max(worst_depol, std::abs(std::abs(depol.lhs - depol.rhs) - 4.0 * p / 3.0 * std::abs(z_expect)));
  }
  return {worst_deph < 1e-10 && worst_depol < 1e-9,
          "dephasing max |lhs - rhs| " + num(worst_deph) + "; depolarizing max |violation - 4p/3 |<Z>|| " +
              num(worst_depol)};
}

Outcome ac7_mitigation() {
  const qcore::NoiseModel noise{0.05, 0.0, 0.0, 0.0, 0.0};
  const std::vector<encode::WeightBounds> bounds{{0.0, encode::kHalfPi}};
  qagg::AggregationConfig exact;
  exact.exact_expectation = true;
  exact.mitigation.channel_inversion = true;
  double worst_mitigated = 0.0;
  double min_raw = 1.0;
  for (int i = 0; i <= 40; ++i) {
    const double mean = 0.2 + i * 0.025;
    const std::vector<std::vector<double>> clients{{mean - 0.15}, {mean + 0.05}, {mean + 0.1}};
    const auto r = qagg::aggregate(clients, bounds, exact, noise, 0);
    worst_mitigated = std::max(worst_mitigated, std::abs(r.estimates[0].value - mean));
    min_raw = std::min(min_raw, std::abs(r.estimates[0].raw_value - mean));
  }
  qagg::AggregationConfig sampled;
  sampled.shots = 100000;
  sampled.mitigation = qagg::MitigationFlags::all();
  std::size_t good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(derive_seed(2024, {7, seed}));
    const double mean = 0.2 + rng.uniform();
    std::vector<std::vector<double>> clients;
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      clients.push_back({std::clamp(mean + 0.2 * (rng.uniform() - 0.5), 0.0, encode::kHalfPi)});
      sum += clients.back()[0];
    }
    const auto r = qagg::aggregate(clients, bounds, sampled, noise, seed);
    if (std::abs(r.estimates[0].value - sum / 4.0) < 0.02) ++good;
  }
  return {worst_mitigated < 1e-6 && min_raw > 0.0 && good >= 95,
          "exact: mitigated error max " + num(worst_mitigated) + ", raw error min " + num(min_raw) +
              "; S=1e5: " + std::to_string(good) + "/100 seeds within 0.02 rad"};
}

Outcome ac8_table() {
  const auto t0 = Clock::now();
  double acc[3] = {0.0, 0.0, 0.0};
  std::uint64_t up_qfl = 0, up_nr = 0;
  const flsim::Strategy strategies[3] = {flsim::Strategy::kFedAvg, flsim::Strategy::kQfl, flsim::Strategy::kNrQfl};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    flsim::ExperimentSettings s;
    s.partition.seed = seed;
    for (int k = 0; k < 3; ++k) {
      const auto records = flsim::run_experiment(s, strategies[k]);
      acc[k] += records.back().accuracy / 10.0;
      for (const auto& r : records) {
        if (strategies[k] == flsim::Strategy::kQfl) up_qfl += r.bytes_up;
        if (strategies[k] == flsim::Strategy::kNrQfl) up_nr += r.bytes_up;
      }
    }
  }
  const double gap_nr = std::abs(acc[2] - acc[0]);
  const double gap_qfl = std::abs(acc[1] - acc[0]);
  const double overhead = static_cast<double>(up_nr) / static_cast<double>(up_qfl) - 1.0;
  const bool a = acc[2] >= acc[1];
  const bool b = gap_nr <= 0.02 && gap_qfl > gap_nr;
  const bool c = overhead >= 0.05 && overhead <= 0.12;
  const double t = seconds_since(t0);
  return {a && b && c && t < 1800.0,
          "accuracy FedAvg " + num(acc[0]) + ", QFL " + num(acc[1]) + ", NR-QFL " + num(acc[2]) + "; gaps NR-QFL " +
              num(gap_nr) + " vs QFL " + num(gap_qfl) + "; upload overhead " + num(100.0 * overhead) + "%; " +
              num(t) + " s"};
}

Outcome ac9_fairness() {
  validation::SuiteOptions opt;
  opt.seed = 2024;
  const auto uniform = validation::check_selection_fairness(opt);

  // Negative control: client 4 never selected (subsets drawn from {0..3}).
  auto bits = qselect::VonNeumannExtractor(qselect::QuantumEntropySource(opt.noise, RngStream(derive_seed(2024, {9}))));
  std::vector<qselect::SelectionVector> history;
  for (std::size_t t = 0; t < 10000; ++t) history.push_back(qselect::select_clients(4, 3, bits, t));
  const double chi = qselect::subset_fairness(history, 5, 3).chi_square;
  const double threshold = qselect::chi_square_quantile(9, 0.99);
  const bool control_rejected = chi > threshold;
  return {uniform.passed && control_rejected,
          uniform.detail + "; never-selected control chi-square " + num(chi) +
              (control_rejected ? " fails the test as required" : " unexpectedly passes")};
}

Outcome ac10_determinism() {
  namespace fs = std::filesystem;
  const auto base = fs::temp_directory_path() / "nrqfl_acceptance_determinism";
  fs::remove_all(base);
  const auto run = [&](const std::string& name) {
    const auto out = base / name;
    const std::string cmd = std::string(NRQFL_CLI_PATH) + " run --seed 11 --out " + out.string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out / "rounds.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return std::make_pair(status, ss.str());
  };
  const auto [s1, a] = run("first");
  const auto [s2, b] = run("second");
  const bool same = s1 == 0 && s2 == 0 && !a.empty() && a == b;
  return {same, "two CLI runs with seed 11: " + std::to_string(a.size()) + " bytes, " +
                    (a == b ? "byte-identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 CPTP suite", ac1_cptp},
      {"AC2 encoding round trip", ac2_round_trip},
      {"AC3 linearity", ac3_linearity},
      {"AC4 noise deviation report", ac4_noise_bound},
      {"AC5 variance bound soundness", ac5_variance_bound},
      {"AC6 commutation", ac6_commutation},
      {"AC7 mitigation efficacy", ac7_mitigation},
      {"AC8 strategy comparison", ac8_table},
      {"AC9 selection fairness", ac9_fairness},
      {"AC10 determinism", ac10_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.passed) ++failures;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
