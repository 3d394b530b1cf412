#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fnlearn/augment.hpp"
#include "fnlearn/errors.hpp"
#include "fnlearn/eval/protocol.hpp"
#include "fnlearn/nn/train.hpp"

namespace fnlearn::pipeline {

/// Flat key=value run configuration. Every key has a default; presets
/// overwrite a subset and explicit settings overwrite presets.
class RunConfig {
 public:
  RunConfig() { apply_preset("paper"); }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "preset", "master_seed", "data_dir", "checkpoint_dir", "eval_dir", "report_dir", "seeds", "curves",
        "batch_size", "learning_rate", "weight_decay", "redraws", "per_class", "models", "classify_budgets",
        "mc_budgets", "freeform_budgets", "freeform_classifier_per_class", "classify_eval_per_class",
        "mc_eval_problems", "freeform_eval_per_class", "kde_bandwidth", "warp_extension", "rescale_min_span",
        "preview_curves", "preview_augmentations"};
    return k;
  }

  static bool known(const std::string& key) {
    for (const auto& k : keys())
      if (k == key) return true;
    return false;
  }

  void apply_preset(const std::string& name) {
    if (name != "paper" && name != "desk") throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
    values_ = {{"preset", name},
               {"master_seed", "0"},
               {"data_dir", "runs/data"},
               {"checkpoint_dir", "runs/checkpoints"},
               {"eval_dir", "runs/eval"},
               {"report_dir", "runs/report"},
               {"seeds", "3"},
               {"curves", "500000"},
               {"batch_size", "512"},
               {"learning_rate", "0.001"},
               {"weight_decay", "1e-06"},
               {"redraws", "10"},
               {"per_class", "400"},
               {"models", "contrastive,raw"},
               {"classify_budgets", "3,10,30,100,300"},
               {"mc_budgets", "3,10,30,100,300"},
               {"freeform_budgets", "1,3,10,30,100"},
               {"freeform_classifier_per_class", "300"},
               {"classify_eval_per_class", "100"},
               {"mc_eval_problems", "500"},
               {"freeform_eval_per_class", "50"},
               {"kde_bandwidth", "0.1"},
               {"warp_extension", "0.4"},
               {"rescale_min_span", "0.8"},
               {"preview_curves", "4"},
               {"preview_augmentations", "4"}};
    if (name == "desk") {
      values_["seeds"] = "1";
      values_["curves"] = "50000";
      values_["redraws"] = "3";
      values_["per_class"] = "100";
    }
  }

  /// Sets one key; `preset` resets every other key to the preset's defaults.
  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    if (key == "preset") {
      apply_preset(value);
      return;
    }
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  long get_int(const std::string& key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      const long out = std::stol(v, &used);
      if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }

  std::uint64_t get_u64(const std::string& key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      const auto out = std::stoull(v, &used);
      if (used == v.size() && !v.starts_with('-')) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }

  double get_real(const std::string& key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream is(get(key));
    std::string part;
    while (std::getline(is, part, ','))
      if (const auto t = gp::detail::trim(part); !t.empty()) out.emplace_back(t);
    if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : get_list(key)) {
      try {
        std::size_t used = 0;
        out.push_back(std::stoi(s, &used));
        if (used == s.size()) continue;
      } catch (const std::exception&) {
      }
      throw ConfigError("config key '" + key + "' expects integers, got '" + s + "'");
    }
    return out;
  }

  std::filesystem::path path(const std::string& key) const { return get(key); }

  /// Reads `key = value` lines; `#` starts a comment. A `preset` line is
  /// applied first regardless of its position.
  void load(std::istream& is, const std::string& origin = "config") {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto t = gp::detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key(gp::detail::trim(t.substr(0, eq)));
      const std::string value(gp::detail::trim(t.substr(eq + 1)));
      if (!known(key)) throw ConfigError("unknown config key '" + key + "' (" + origin + ":" + std::to_string(lineno) + ")");
      entries.emplace_back(key, value);
    }
    for (const auto& [k, v] : entries)
      if (k == "preset") set(k, v);
    for (const auto& [k, v] : entries)
      if (k != "preset") set(k, v);
  }

  void load_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw MissingArtifact(p.string());
    load(is, p.string());
  }

  /// Resolved snapshot in key order; loading it reproduces this config.
  std::string snapshot() const {
    std::ostringstream os;
    os << "preset = " << get("preset") << '\n';
    for (const auto& k : keys())
      if (k != "preset") os << k << " = " << get(k) << '\n';
    return os.str();
  }

  void write_snapshot(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "config.resolved", std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / "config.resolved").string());
    os << snapshot();
  }

  // Typed views -------------------------------------------------------------

  nn::TrainConfig train_config() const {
    nn::TrainConfig t;
    t.batch_size = static_cast<std::size_t>(positive("batch_size"));
    t.total_curves = static_cast<std::size_t>(positive("curves"));
    t.learning_rate = get_real("learning_rate");
    t.weight_decay = get_real("weight_decay");
    return t;
  }

  augment::AugmentConfig augment_config() const {
    augment::AugmentConfig a;
    a.kde_bandwidth = get_real("kde_bandwidth");
    a.warp_extension = get_real("warp_extension");
    a.rescale_min_span = get_real("rescale_min_span");
    try {
      a.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return a;
  }

  eval::Protocol protocol() const {
    eval::Protocol p;
    p.n_seeds = static_cast<int>(positive("seeds"));
    p.n_redraws = static_cast<int>(positive("redraws"));
    p.classify_budgets = get_int_list("classify_budgets");
    p.mc_budgets = get_int_list("mc_budgets");
    p.freeform_budgets = get_int_list("freeform_budgets");
    p.freeform_classifier_per_class = static_cast<int>(positive("freeform_classifier_per_class"));
    p.classify_eval_per_class = static_cast<int>(positive("classify_eval_per_class"));
    p.mc_eval_problems = static_cast<int>(positive("mc_eval_problems"));
    p.freeform_eval_per_class = static_cast<int>(positive("freeform_eval_per_class"));
    p.validate();
    return p;
  }

  long positive(const std::string& key) const {
    const long v = get_int(key);
    if (v < 1) throw ConfigError("config key '" + key + "' must be positive");
    return v;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fnlearn::pipeline
