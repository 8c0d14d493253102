#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrqfl/cli/config.hpp"
#include "nrqfl/flsim.hpp"
#include "nrqfl/validation.hpp"

namespace nrqfl::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kConfigError = 2, kRuntimeFailure = 3 };

inline constexpr const char* kRoundsHeader = "round,strategy,accuracy,f1,grad_variance,bytes_up,bytes_down,selected,wall_ms";
inline constexpr const char* kSweepHeader = "axis,value,strategy,accuracy,f1,agg_rmse,estimator_variance";

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string join_selection(const std::vector<std::size_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

}  // namespace detail

inline std::string csv_row(const flsim::RoundRecord& r) {
  std::string row;
  row += std::to_string(r.round) + ',';
  row += std::string(flsim::to_string(r.strategy)) + ',';
  row += detail::fmt("%.6f", r.accuracy) + ',';
  row += detail::fmt("%.6f", r.f1) + ',';
  row += detail::fmt("%.9g", r.grad_variance) + ',';
  row += std::to_string(r.bytes_up) + ',';
  row += std::to_string(r.bytes_down) + ',';
  row += detail::join_selection(r.selection.selected) + ',';
  row += detail::fmt("%.3f", r.wall_ms);
  return row;
}

struct StrategySummary {
  flsim::Metrics initial;
  std::vector<flsim::RoundRecord> records;

  double final_accuracy() const { return records.empty() ? initial.accuracy : records.back().accuracy; }
  double final_f1() const { return records.empty() ? initial.macro_f1 : records.back().f1; }
  double mean_aggregation_rmse() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records) s += r.aggregation_rmse;
    return s / static_cast<double>(records.size());
  }
};

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const std::map<flsim::Strategy, StrategySummary>& runs) {
  nlohmann::json strategies = nlohmann::json::object();
  for (auto s : cfg.strategies) {
    const auto& run = runs.at(s);
    std::uint64_t up = 0, down = 0;
    double max_dev = 0.0;
    std::size_t clipped = 0;
    for (const auto& r : run.records) {
      up += r.bytes_up;
      down += r.bytes_down;
      max_dev = std::max(max_dev, r.noise_deviation);
      clipped += r.clipped;
    }
    strategies[std::string(flsim::to_string(s))] = {
        {"rounds", run.records.size()},
        {"initial_accuracy", run.initial.accuracy},
        {"final_accuracy", std::stod(detail::fmt("%.6f", run.final_accuracy()))},
        {"final_f1", std::stod(detail::fmt("%.6f", run.final_f1()))},
        {"mean_aggregation_rmse", run.mean_aggregation_rmse()},
        {"max_noise_deviation", max_dev},
        {"clipped_values", clipped},
        {"total_bytes_up", up},
        {"total_bytes_down", down},
    };
  }
  nlohmann::json doc = {
      {"suite_version", validation::kSuiteVersion},
      {"config", to_json(cfg)},
      {"strategies", strategies},
  };
  if (runs.contains(flsim::Strategy::kQfl) && runs.contains(flsim::Strategy::kNrQfl)) {
    const auto shape = cfg.settings.shape();
    const auto m = cfg.settings.clients_per_round();
    const double qfl = static_cast<double>(flsim::bytes_up_per_round(shape, m, flsim::Strategy::kQfl));
    const double nr = static_cast<double>(flsim::bytes_up_per_round(shape, m, flsim::Strategy::kNrQfl));
    doc["nrqfl_upload_overhead_vs_qfl"] = nr / qfl - 1.0;
  }
  return doc;
}

/// Runs every configured strategy and writes rounds.csv and summary.json
/// into the output directory.
inline int cmd_run(const ExperimentConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "rounds.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "rounds.csv").string());
    csv << kRoundsHeader << '\n';

    std::map<flsim::Strategy, StrategySummary> runs;
    for (auto s : cfg.strategies) {
      auto& summary = runs[s];
      summary.records = flsim::run_experiment(
          cfg.settings, s, [&](const flsim::RoundRecord& r) { csv << csv_row(r) << '\n'; }, &summary.initial);
      out << flsim::to_string(s) << ": final accuracy " << detail::fmt("%.4f", summary.final_accuracy())
          << ", macro-F1 " << detail::fmt("%.4f", summary.final_f1()) << '\n';
    }
    csv.close();
    if (!csv) throw std::runtime_error("failed writing rounds.csv");

    std::ofstream js(dir / "summary.json");
    js << summary_json(cfg, runs).dump(2) << '\n';
    if (!js) throw std::runtime_error("failed writing summary.json");
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

/// Runs the invariant suite, printing one line per check.
inline int cmd_validate(const validation::SuiteOptions& opt, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    bool all = true;
    for (const auto& r : validation::run_suite(opt)) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
      all = all && r.passed;
    }
    out << (all ? "all checks passed" : "one or more checks failed") << " (suite " << validation::kSuiteVersion
        << ")\n";
    return all ? kOk : kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

enum class SweepAxis { kShots, kDepth, kNoise };

inline std::optional<SweepAxis> parse_axis(std::string_view name) {
  if (name == "shots") return SweepAxis::kShots;
  if (name == "depth") return SweepAxis::kDepth;
  if (name == "noise") return SweepAxis::kNoise;
  return std::nullopt;
}

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kShots: return "shots";
    case SweepAxis::kDepth: return "depth";
    case SweepAxis::kNoise: return "noise";
  }
  return "unknown";
}

/// Applies one sweep value. Depth is swept through the client count, since
/// every participating client contributes one gate.
inline ExperimentConfig with_axis_value(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig cfg = base;
  auto& s = cfg.settings;
  const auto as_count = [&](const char* what) {
    if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("--values", std::string(what) + " must be positive integers");
    return static_cast<std::uint64_t>(value);
  };
  switch (axis) {
    case SweepAxis::kShots:
      s.aggregation.shots = as_count("shot counts");
      break;
    case SweepAxis::kDepth:
      s.partition.n_clients = static_cast<std::size_t>(as_count("depths"));
      if (s.partition.n_clients > qagg::kMaxDepth) throw ConfigError("--values", "depth must be at most 9");
      s.select_m = 0;
      break;
    case SweepAxis::kNoise:
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("--values", "noise levels must be in [0, 1]");
      s.noise.p_depol = value;
      break;
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--values", e.what());
  }
  return cfg;
}

/// Variance of one aggregated parameter over repeated executions of the
/// strategy's aggregation pipeline, with every participant sending a
/// different fixed angle. Zero for FedAvg.
inline double probe_estimator_variance(const flsim::ExperimentSettings& settings, flsim::Strategy strategy,
                                       std::size_t trials = 200) {
  if (strategy == flsim::Strategy::kFedAvg) return 0.0;
  const std::size_t n = settings.clients_per_round();
  std::vector<std::vector<double>> clients;
  for (std::size_t k = 0; k < n; ++k) {
    const double spread = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1) - 0.5;
    clients.push_back({encode::kHalfPi / 2.0 + 0.4 * spread});
  }
  const std::vector<encode::WeightBounds> bounds{encode::WeightBounds(0.0, encode::kHalfPi)};
  const auto cfg = flsim::strategy_aggregation(settings, strategy);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto seed = derive_seed(settings.seed(), {tag(StreamTag::kAggregation), 0xFFFFFFFFULL, t});
    const double x = qagg::aggregate(clients, bounds, cfg, settings.noise, seed).values[0];
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  return trials > 1 ? m2 / static_cast<double>(trials - 1) : 0.0;
}

/// Runs one experiment per axis value and writes sweep.csv.
inline int cmd_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<ExperimentConfig> configs;
  try {
    if (values.size() < 2) throw ConfigError("--values", "a sweep needs at least two values");
    for (double v : values) configs.push_back(with_axis_value(base, axis, v));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const std::filesystem::path dir(base.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "sweep.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "sweep.csv").string());
    csv << kSweepHeader << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (auto s : configs[i].strategies) {
        StrategySummary summary;
        summary.records = flsim::run_experiment(configs[i].settings, s, {}, &summary.initial);
        const double var = probe_estimator_variance(configs[i].settings, s);
        csv << to_string(axis) << ',' << detail::fmt("%.9g", values[i]) << ',' << flsim::to_string(s) << ','
            << detail::fmt("%.6f", summary.final_accuracy()) << ',' << detail::fmt("%.6f", summary.final_f1()) << ','
            << detail::fmt("%.9g", summary.mean_aggregation_rmse()) << ',' << detail::fmt("%.9g", var) << '\n';
      }
      out << to_string(axis) << '=' << detail::fmt("%g", values[i]) << " done\n";
    }
    csv.close();
    if (!csv) throw std::runtime_error("failed writing sweep.csv");
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace nrqfl::cli
