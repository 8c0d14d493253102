#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrqfl/flsim.hpp"

namespace nrqfl::cli {

/// Configuration problem; `key_path()` names the offending key, e.g. "noise.p_depol".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::runtime_error(key_path.empty() ? message : key_path + ": " + message), key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

struct ExperimentConfig {
  flsim::ExperimentSettings settings;
  std::vector<flsim::Strategy> strategies{flsim::Strategy::kFedAvg, flsim::Strategy::kQfl, flsim::Strategy::kNrQfl};
  std::string output_dir = "results";
};

/// Command-line overrides; they take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> strategies;  // comma-separated
};

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_, "expected a JSON object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  /// Rejects keys not in `allowed`.
  void restrict_to(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : obj_.items())
      if (!allowed.contains(k)) throw ConfigError(path(k), "unknown key");
  }

  const json* find(const std::string& key) const {
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void count(const std::string& key, std::size_t& out, std::size_t min_value) const {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min_value))
        throw ConfigError(path(key), "expected an integer >= " + std::to_string(min_value));
      out = v->get<std::size_t>();
    }
  }

  void count64(const std::string& key, std::uint64_t& out, std::uint64_t min_value) const {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min_value))
        throw ConfigError(path(key), "expected an integer >= " + std::to_string(min_value));
      out = v->get<std::uint64_t>();
    }
  }

  void real(const std::string& key, double& out, double lo, double hi, bool lo_open = false) const {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      const double x = v->get<double>();
      if (!(x >= lo && x <= hi) || (lo_open && x == lo))
      {
        std::ostringstream msg;
        msg << "value " << v->dump() << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
        throw ConfigError(path(key), msg.str());
      }
      out = x;
    }
  }

  void probability(const std::string& key, double& out) const { real(key, out, 0.0, 1.0); }

  void flag(const std::string& key, bool& out) const {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) const {
    if (const json* v = find(key)) {
      if (!v->is_string() || v->get<std::string>().empty()) throw ConfigError(path(key), "expected a non-empty string");
      out = v->get<std::string>();
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
};

inline std::vector<flsim::Strategy> parse_strategy_list(const std::vector<std::string>& names, const std::string& key) {
  if (names.empty()) throw ConfigError(key, "at least one strategy is required");
  std::vector<flsim::Strategy> out;
  for (const auto& n : names) {
    auto s = flsim::parse_strategy(n);
    if (!s) throw ConfigError(key, "unknown strategy '" + n + "' (expected fedavg, qfl or nrqfl)");
    if (std::find(out.begin(), out.end(), *s) != out.end()) throw ConfigError(key, "duplicate strategy '" + n + "'");
    out.push_back(*s);
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Validates a config document and fills defaults. Unknown keys are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
  using detail::Reader;
  ExperimentConfig cfg;
  auto& s = cfg.settings;
  auto& part = s.partition;
  auto& agg = s.aggregation;

  Reader top(doc, "");
  top.restrict_to({"seed", "n_clients", "samples_per_client", "skew", "classes", "feature_dim", "class_separation",
                   "test_samples_per_class", "rounds", "local_epochs", "lr", "strategies", "noise", "shots", "repeats",
                   "exact_expectation", "max_qubits_per_batch", "mitigation", "n_servers", "select_m",
                   "qfl_weight_bound", "sigma_shot", "sigma_gate", "record_wall_time", "output_dir"});
  top.count64("seed", part.seed, 0);
  top.count("n_clients", part.n_clients, 2);
  top.count("samples_per_client", part.samples_per_client, 1);
  top.real("skew", part.skew, 0.0, 1.0);
  top.count("classes", part.classes, 2);
  top.count("feature_dim", part.feature_dim, 2);
  if (part.feature_dim > 8) throw ConfigError("feature_dim", "expected an integer in [2, 8]");
  top.real("class_separation", part.class_separation, 0.0, 1e6, true);
  top.count("test_samples_per_class", part.test_samples_per_class, 1);
  top.count("rounds", s.rounds, 0);
  top.count("local_epochs", s.local_epochs, 1);
  top.real("lr", s.learning_rate, 0.0, 1e6, true);
  if (const auto* v = top.find("strategies")) {
    if (!v->is_array()) throw ConfigError("strategies", "expected an array of strategy names");
    std::vector<std::string> names;
    for (const auto& e : *v) {
      if (!e.is_string()) throw ConfigError("strategies", "expected strategy names as strings");
      names.push_back(e.get<std::string>());
    }
    cfg.strategies = detail::parse_strategy_list(names, "strategies");
  }
  if (const auto* v = top.find("noise")) {
    Reader noise(*v, "noise");
    noise.restrict_to({"p_depol", "p_deph", "gamma", "readout_flip", "rotation_jitter"});
    noise.probability("p_depol", s.noise.p_depol);
    noise.probability("p_deph", s.noise.p_deph);
    noise.probability("gamma", s.noise.gamma);
    noise.probability("readout_flip", s.noise.readout_flip);
    noise.real("rotation_jitter", s.noise.rotation_jitter, 0.0, 10.0);
  }
  top.count64("shots", agg.shots, 1);
  top.count("repeats", agg.repeats, 1);
  top.flag("exact_expectation", agg.exact_expectation);
  top.count("max_qubits_per_batch", agg.max_qubits_per_batch, 1);
  if (agg.max_qubits_per_batch > qcore::kMaxQubits)
    throw ConfigError("max_qubits_per_batch", "expected an integer in [1, 6]");
  if (const auto* v = top.find("mitigation")) {
    Reader mit(*v, "mitigation");
    mit.restrict_to({"measurement_averaging", "channel_inversion", "calibration"});
    mit.flag("measurement_averaging", agg.mitigation.measurement_averaging);
    mit.flag("channel_inversion", agg.mitigation.channel_inversion);
    mit.flag("calibration", agg.mitigation.calibration);
  }
  top.count("n_servers", s.n_servers, 1);
  top.count("select_m", s.select_m, 1);
  if (s.select_m > part.n_clients) throw ConfigError("select_m", "exceeds n_clients");
  top.real("qfl_weight_bound", s.qfl_weight_bound, 0.0, 1e6, true);
  top.real("sigma_shot", agg.sigma_shot, 0.0, 1e6);
  top.real("sigma_gate", agg.sigma_gate, 0.0, 1e6);
  top.flag("record_wall_time", s.record_wall_time);
  top.text("output_dir", cfg.output_dir);

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return cfg;
}

inline void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.settings.partition.seed = *o.seed;
  if (o.output_dir) {
    if (o.output_dir->empty()) throw ConfigError("--out", "expected a directory");
    cfg.output_dir = *o.output_dir;
  }
  if (o.strategies) cfg.strategies = detail::parse_strategy_list(detail::split_list(*o.strategies), "--strategy");
}

/// Reads `path` (if given) and applies overrides. An absent path means all
/// defaults.
inline ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides = {}) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("", "cannot open config file '" + path->string() + "'");
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("", "malformed JSON in '" + path->string() + "': " + e.what());
    }
  }
  ExperimentConfig cfg = config_from_json(doc);
  apply_overrides(cfg, overrides);
  return cfg;
}

/// Config echo for summary.json.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.settings;
  const auto& p = s.partition;
  const auto& a = s.aggregation;
  nlohmann::json strategies = nlohmann::json::array();
  for (auto st : cfg.strategies) strategies.push_back(std::string(flsim::to_string(st)));
  return {
      {"seed", p.seed},
      {"n_clients", p.n_clients},
      {"samples_per_client", p.samples_per_client},
      {"skew", p.skew},
      {"classes", p.classes},
      {"feature_dim", p.feature_dim},
      {"class_separation", p.class_separation},
      {"test_samples_per_class", p.test_samples_per_class},
      {"rounds", s.rounds},
      {"local_epochs", s.local_epochs},
      {"lr", s.learning_rate},
      {"strategies", strategies},
      {"noise",
       {{"p_depol", s.noise.p_depol},
        {"p_deph", s.noise.p_deph},
        {"gamma", s.noise.gamma},
        {"readout_flip", s.noise.readout_flip},
        {"rotation_jitter", s.noise.rotation_jitter}}},
      {"shots", a.shots},
      {"repeats", a.repeats},
      {"exact_expectation", a.exact_expectation},
      {"max_qubits_per_batch", a.max_qubits_per_batch},
      {"mitigation",
       {{"measurement_averaging", a.mitigation.measurement_averaging},
        {"channel_inversion", a.mitigation.channel_inversion},
        {"calibration", a.mitigation.calibration}}},
      {"n_servers", s.n_servers},
      {"select_m", s.clients_per_round()},
      {"qfl_weight_bound", s.qfl_weight_bound},
      {"sigma_shot", a.sigma_shot},
      {"sigma_gate", a.sigma_gate},
      {"record_wall_time", s.record_wall_time},
      {"output_dir", cfg.output_dir},
  };
}

}  // namespace nrqfl::cli
