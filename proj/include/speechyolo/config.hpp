#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "speechyolo/features.hpp"
#include "speechyolo/grid.hpp"
#include "speechyolo/loss.hpp"
#include "speechyolo/network.hpp"

namespace speechyolo {

// Flat "section.key" -> value map read from a TOML-style document:
// [section] headers, key = value lines, '#' comments, optional double
// quotes around string values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

struct RunPaths {
  std::string manifest, alignments, lexicon, clips, checkpoint, report_dir;
};

struct RunConfig {
  GridConfig grid;  // grid.keywords is taken from the lexicon at run time
  FeatureConfig features;
  LossWeights loss;
  LossMode loss_mode = LossMode::kYolo;
  AssignMode assign_mode = AssignMode::kCenter;
  std::string backbone = "tiny";
  bool normalize_input = true;
  OptimizerConfig optimizer;
  double stride = 0.5;            // clip extraction stride, seconds
  double holdout_fraction = 0.2;  // tail of the clip list held out
  RunPaths paths;

  // Unknown keys raise InvalidInput so typos do not pass silently.
  static RunConfig from(const KeyValueConfig& kv);
  void validate() const;
};

LossMode parse_loss_mode(const std::string& name);
AssignMode parse_assign_mode(const std::string& name);

}  // namespace speechyolo
