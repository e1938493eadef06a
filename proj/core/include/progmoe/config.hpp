#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "progmoe/moe.hpp"
#include "progmoe/training.hpp"

namespace progmoe {

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored.
/// Every key must be read exactly by some consumer, otherwise
/// require_all_consumed() reports it as unknown.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<config>");
  static KeyValues load(const std::string& path);

  /// Accepts "key=value"; used for command-line overrides.
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  void require_all_consumed() const;

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Everything `fit` needs besides the data.
struct EngineConfig {
  ModelConfig model;
  TrainConfig train;
  int error_map_bins = 4;
};

/// Reads known keys (defaults for absent ones) and rejects unknown keys.
EngineConfig engine_config_from(const KeyValues& kv);
EngineConfig load_engine_config(const std::string& path);

/// Canonical text with every key, grouped and commented. Parsing the dump
/// reproduces the same config.
std::string dump(const EngineConfig& cfg);

/// FNV-1a 64 of the canonical dump.
std::uint64_t config_hash(const EngineConfig& cfg);
std::uint64_t fnv1a64(const std::string& text);

std::string format_list(const std::vector<double>& values);
std::string format_list(const std::vector<int>& values);

}  // namespace progmoe
