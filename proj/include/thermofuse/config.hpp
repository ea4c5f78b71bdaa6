#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "thermofuse/alignment.hpp"
#include "thermofuse/cart.hpp"
#include "thermofuse/detection.hpp"
#include "thermofuse/early_fusion.hpp"
#include "thermofuse/evaluation.hpp"
#include "thermofuse/late_fusion.hpp"
#include "thermofuse/synth.hpp"

namespace thermofuse {

/// Flat key-value file: `[section]` headers, `key = value` lines, `#` comments.
/// Values are numbers, true/false, "quoted strings" or [comma, separated] arrays
/// of numbers. Keys are stored fully qualified (`section.key`).
struct ConfigValue {
  std::string raw;
  int line = 0;
};

using ConfigEntries = std::map<std::string, ConfigValue>;

/// Throws ConfigError (with line numbers) on syntax errors or duplicate keys.
ConfigEntries parse_config(const std::string& text);
ConfigEntries read_config_file(const std::string& path);

struct TileConfig {
  TileOptions options{};
  double nms_iou = 0.5;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string manifest;
  std::string out;
  GateConfig gate{};
  double crop_fraction = kVisCropFraction;
  bool strict_sensor_dims = false;
  FusionOptions fusion{};
  SingletonPolicy policy = SingletonPolicy::ClassifyAll;
  double label_iou = 0.5;
  CartHyperparams cart{};
  EvalConfig eval{};
  SplitRatios split{};
  TileConfig tile{};
  ScenarioConfig scenario{};

  /// Applies one fully qualified key. Throws ConfigError naming the key when it
  /// is unknown or the value does not parse.
  void set(const std::string& key, const std::string& raw, int line = 0);
  void apply(const ConfigEntries& entries);
  /// Throws ConfigError when any nested section is invalid.
  void validate() const;

  /// Every key with its effective value, one `key = value` line each, sorted.
  std::string canonical() const;
  std::string hash() const;  // 16 hex digits of FNV-1a over canonical()
};

/// All recognised fully qualified keys.
std::vector<std::string> config_keys();

}  // namespace thermofuse
