#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nrqfl/encode.hpp"
#include "nrqfl/flsim/data.hpp"
#include "nrqfl/flsim/model.hpp"
#include "nrqfl/qagg.hpp"
#include "nrqfl/qselect.hpp"
#include "nrqfl/rng.hpp"

namespace nrqfl::flsim {

enum class Strategy { kFedAvg, kQfl, kNrQfl };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kFedAvg: return "fedavg";
    case Strategy::kQfl: return "qfl";
    case Strategy::kNrQfl: return "nrqfl";
  }
  return "unknown";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "fedavg") return Strategy::kFedAvg;
  if (name == "qfl") return Strategy::kQfl;
  if (name == "nrqfl") return Strategy::kNrQfl;
  return std::nullopt;
}

/// Bytes per transmitted parameter (double precision).
inline constexpr std::uint64_t kBytesPerParameter = 8;
/// Bytes of bounds metadata per bound block (lo and hi as doubles).
inline constexpr std::uint64_t kBytesPerBounds = 16;

struct ExperimentSettings {
  PartitionConfig partition;
  std::size_t rounds = 50;
  std::size_t local_epochs = 5;
  double learning_rate = 0.1;
  /// Clients selected per round; 0 means all.
  std::size_t select_m = 0;
  std::size_t n_servers = 1;
  qcore::NoiseModel noise{0.05, 0.0, 0.03, 0.0, 0.0};
  /// Shots, repeats and the mitigation used by NR-QFL. QFL uses the same
  /// shots with every mitigation flag off.
  qagg::AggregationConfig aggregation{.shots = 4096, .repeats = 4, .mitigation = qagg::MitigationFlags::all()};
  /// Fixed encoding interval [-B, B] used by QFL, which has no bounds metadata.
  double qfl_weight_bound = 8.0;
  bool record_wall_time = false;

  std::uint64_t seed() const noexcept { return partition.seed; }
  std::size_t clients_per_round() const noexcept { return select_m == 0 ? partition.n_clients : select_m; }
  ModelShape shape() const noexcept { return {partition.feature_dim, partition.classes}; }

  void validate() const {
    partition.validate();
    noise.validate();
    aggregation.validate();
    if (clients_per_round() > partition.n_clients)
      throw std::invalid_argument("ExperimentSettings: select_m exceeds n_clients");
    if (n_servers == 0) throw std::invalid_argument("ExperimentSettings: n_servers must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("ExperimentSettings: learning rate must be > 0");
    if (!(qfl_weight_bound > 0.0)) throw std::invalid_argument("ExperimentSettings: qfl_weight_bound must be > 0");
  }
};

struct RoundRecord {
  std::size_t round = 0;
  Strategy strategy = Strategy::kFedAvg;
  double accuracy = 0.0;
  double f1 = 0.0;
  /// Mean over clients and parameters of the squared deviation of each
  /// client update from the mean update.
  double grad_variance = 0.0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  qselect::SelectionVector selection;
  double wall_ms = 0.0;

  /// max_j D(rho_j, E(rho_j)) over the ideal aggregated states (0 for FedAvg).
  double noise_deviation = 0.0;
  std::vector<double> ideal_angles;
  /// RMS difference between the aggregate and the exact client mean.
  double aggregation_rmse = 0.0;
  /// Mean squared angle-space error of the aggregate against the exact mean angle.
  double angle_mse = 0.0;
  std::size_t clipped = 0;
};

/// Closed-form per-round upload: 8 bytes per parameter per participating
/// client, plus 16 bytes of bounds per class row for NR-QFL.
inline std::uint64_t bytes_up_per_round(const ModelShape& shape, std::size_t participants, Strategy s) {
  std::uint64_t bytes = kBytesPerParameter * shape.parameters() * participants;
  if (s == Strategy::kNrQfl) bytes += kBytesPerBounds * shape.classes;
  return bytes;
}

/// Broadcast of the global model to every client.
inline std::uint64_t bytes_down_per_round(const ModelShape& shape, std::size_t n_clients) {
  return kBytesPerParameter * shape.parameters() * n_clients;
}

/// Mean over clients and parameters of the squared deviation of each client
/// update (local - global) from the mean update.
inline double update_variance(std::span<const std::vector<double>> locals, std::span<const double> global) {
  if (locals.empty()) throw std::invalid_argument("update_variance: no client updates");
  const std::size_t p = global.size();
  std::vector<double> mean(p, 0.0);
  for (const auto& v : locals)
    for (std::size_t j = 0; j < p; ++j) mean[j] += v[j] - global[j];
  for (auto& v : mean) v /= static_cast<double>(locals.size());
  double s = 0.0;
  for (const auto& v : locals)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = (v[j] - global[j]) - mean[j];
      s += d * d;
    }
  return s / static_cast<double>(locals.size() * p);
}

/// Aggregation settings a strategy actually uses. QFL runs without
/// mitigation; FedAvg never reaches the quantum path.
inline qagg::AggregationConfig strategy_aggregation(const ExperimentSettings& settings, Strategy s) {
  qagg::AggregationConfig cfg = settings.aggregation;
  if (s != Strategy::kNrQfl) cfg.mitigation = qagg::MitigationFlags::none();
  return cfg;
}

/// Per-parameter bounds from the min/max of each class row over the
/// participating clients. This is the metadata NR-QFL transmits.
inline std::vector<encode::WeightBounds> row_bounds(std::span<const std::vector<double>> clients,
                                                    const ModelShape& shape) {
  std::vector<encode::WeightBounds> bounds;
  bounds.reserve(shape.parameters());
  for (std::size_t c = 0; c < shape.classes; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& v : clients)
      for (std::size_t k = 0; k < shape.row_size(); ++k) {
        lo = std::min(lo, v[c * shape.row_size() + k]);
        hi = std::max(hi, v[c * shape.row_size() + k]);
      }
    const auto b = encode::WeightBounds::covering(lo, hi);
    for (std::size_t k = 0; k < shape.row_size(); ++k) bounds.push_back(b);
  }
  return bounds;
}

/// Mutable state of one experiment run (one strategy).
class ExperimentState {
 public:
  ExperimentState(const ExperimentSettings& settings, Strategy strategy)
      : settings_(settings),
        strategy_(strategy),
        partition_(make_partition(settings.partition)),
        shape_(settings.shape()),
        entropy_(qselect::QuantumEntropySource(settings.noise,
                                               RngStream(derive_seed(settings.seed(), {tag(StreamTag::kSelection)})))) {
    settings_.validate();
    model_.weights.assign(shape_.parameters(), 0.0);
  }

  const ExperimentSettings& settings() const noexcept { return settings_; }
  Strategy strategy() const noexcept { return strategy_; }
  const DataPartition& partition() const noexcept { return partition_; }
  const ModelShape& shape() const noexcept { return shape_; }
  const GlobalModel& model() const noexcept { return model_; }
  Metrics evaluate_global() const { return evaluate(model_.weights, shape_, partition_.test); }

  /// One pass of broadcast, selection, local training, aggregation and
  /// replenishment.
  RoundRecord run_round() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t t = model_.round + 1;
    const std::size_t n = settings_.partition.n_clients;
    const std::size_t m = settings_.clients_per_round();

    RoundRecord rec;
    rec.round = t;
    rec.strategy = strategy_;
    rec.selection = qselect::select_clients(n, m, entropy_, t);

    std::vector<std::vector<double>> locals;
    std::vector<double> sizes;
    locals.reserve(m);
    for (std::size_t id : rec.selection.selected) {
      const Dataset& d = partition_.clients[id];
      locals.push_back(local_train(d, shape_, model_.weights, settings_.local_epochs, settings_.learning_rate));
      sizes.push_back(static_cast<double>(d.size()));
    }
    rec.grad_variance = update_variance(locals, model_.weights);

    std::vector<double> next;
    const std::vector<double> exact_mean = fedavg_aggregate(locals, std::vector<double>(m, 1.0));
    if (strategy_ == Strategy::kFedAvg) {
      next = fedavg_aggregate(locals, sizes);
    } else {
      const qagg::AggregationConfig cfg = strategy_aggregation(settings_, strategy_);
      std::vector<encode::WeightBounds> bounds;
      if (strategy_ == Strategy::kQfl) {
        const double b = settings_.qfl_weight_bound;
        bounds.assign(shape_.parameters(), encode::WeightBounds(-b, b));
      } else {
        bounds = row_bounds(locals, shape_);
      }
      const std::uint64_t seed = derive_seed(settings_.seed(), {tag(StreamTag::kAggregation), t});
      auto agg = qagg::replicated_aggregate(locals, bounds, cfg, settings_.noise, settings_.n_servers, seed);
      next = std::move(agg.values);
      rec.clipped = agg.clipped;
      rec.ideal_angles = agg.ideal_angles;
      rec.noise_deviation = qagg::round_noise_deviation(agg.ideal_angles, settings_.noise);
      double se = 0.0;
      for (std::size_t j = 0; j < agg.estimates.size(); ++j) {
        const double d = agg.estimates[j].value - agg.ideal_angles[j];
        se += d * d;
      }
      rec.angle_mse = se / static_cast<double>(agg.estimates.size());
    }
    double se = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j) se += (next[j] - exact_mean[j]) * (next[j] - exact_mean[j]);
    rec.aggregation_rmse = std::sqrt(se / static_cast<double>(next.size()));

    model_.weights = std::move(next);
    model_.round = t;
    const Metrics metrics = evaluate_global();
    rec.accuracy = metrics.accuracy;
    rec.f1 = metrics.macro_f1;
    rec.bytes_up = bytes_up_per_round(shape_, m, strategy_);
    rec.bytes_down = bytes_down_per_round(shape_, n);
    if (settings_.record_wall_time)
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

 private:
  ExperimentSettings settings_;
  Strategy strategy_;
  DataPartition partition_;
  ModelShape shape_;
  GlobalModel model_;
  qselect::VonNeumannExtractor<qselect::QuantumEntropySource> entropy_;
};

using RoundSink = std::function<void(const RoundRecord&)>;

/// Runs `settings.rounds` rounds of one strategy. Records are passed to
/// `sink` as they complete and also returned.
inline std::vector<RoundRecord> run_experiment(const ExperimentSettings& settings, Strategy strategy,
                                               const RoundSink& sink = {}, Metrics* initial = nullptr) {
  ExperimentState state(settings, strategy);
  if (initial != nullptr) *initial = state.evaluate_global();
  std::vector<RoundRecord> records;
  records.reserve(settings.rounds);
  for (std::size_t t = 0; t < settings.rounds; ++t) {
    records.push_back(state.run_round());
    if (sink) sink(records.back());
  }
  return records;
}

}  // namespace nrqfl::flsim
