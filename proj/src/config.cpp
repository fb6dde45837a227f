#include "speechyolo/config.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "speechyolo/error.hpp"
#include "speechyolo/io_util.hpp"

namespace speechyolo {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quotes = !in_quotes;
      if (line[i] == '#' && !in_quotes) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected 'key = value'", lineno);
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw FormatError("empty key", lineno);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw InvalidInput("config key " + key + ": not a number: '" + s + "'");
  }
  return v;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw InvalidInput("config key " + key + ": not an integer: '" + s + "'");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw InvalidInput("config key " + key + ": not a boolean: '" + it->second + "'");
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "yolo") return LossMode::kYolo;
  if (name == "paper_literal") return LossMode::kPaperLiteral;
  throw InvalidInput("unknown loss mode '" + name + "'");
}

AssignMode parse_assign_mode(const std::string& name) {
  if (name == "center") return AssignMode::kCenter;
  if (name == "paper_literal") return AssignMode::kPaperLiteral;
  throw InvalidInput("unknown assignment mode '" + name + "'");
}

RunConfig RunConfig::from(const KeyValueConfig& kv) {
  static const std::set<std::string> known = {
      "grid.duration",        "grid.cells",           "grid.boxes",
      "features.sample_rate", "features.window_len",  "features.hop_len",
      "features.fft_size",    "features.log_compress", "loss.lambda_center",
      "loss.lambda_duration", "loss.lambda_noobj",    "loss.mode",
      "loss.assign",          "model.backbone",       "model.normalize_input",
      "optimizer.algorithm",  "optimizer.learning_rate", "optimizer.epochs",
      "optimizer.batch_size", "optimizer.seed",       "data.stride",
      "data.holdout",         "paths.manifest",       "paths.alignments",
      "paths.lexicon",        "paths.clips",          "paths.checkpoint",
      "paths.report_dir"};
  for (const auto& [key, value] : kv.values()) {
    if (!known.count(key)) throw InvalidInput("unknown config key '" + key + "'");
  }

  RunConfig c;
  c.grid.duration = kv.get_double("grid.duration", c.grid.duration);
  c.grid.cells = static_cast<int>(kv.get_int("grid.cells", c.grid.cells));
  c.grid.boxes = static_cast<int>(kv.get_int("grid.boxes", c.grid.boxes));
  c.features.sample_rate = static_cast<int>(kv.get_int("features.sample_rate", c.features.sample_rate));
  c.features.window_len = kv.get_double("features.window_len", c.features.window_len);
  c.features.hop_len = kv.get_double("features.hop_len", c.features.hop_len);
  c.features.fft_size = static_cast<int>(kv.get_int("features.fft_size", c.features.fft_size));
  c.features.log_compress = kv.get_bool("features.log_compress", c.features.log_compress);
  c.loss.lambda_center = kv.get_double("loss.lambda_center", c.loss.lambda_center);
  c.loss.lambda_duration = kv.get_double("loss.lambda_duration", c.loss.lambda_duration);
  c.loss.lambda_noobj = kv.get_double("loss.lambda_noobj", c.loss.lambda_noobj);
  c.loss_mode = parse_loss_mode(kv.get_string("loss.mode", "yolo"));
  c.assign_mode = parse_assign_mode(kv.get_string("loss.assign", "center"));
  c.backbone = kv.get_string("model.backbone", c.backbone);
  c.normalize_input = kv.get_bool("model.normalize_input", c.normalize_input);
  c.optimizer.algorithm = kv.get_string("optimizer.algorithm", c.optimizer.algorithm);
  c.optimizer.learning_rate = kv.get_double("optimizer.learning_rate", c.optimizer.learning_rate);
  c.optimizer.epochs = static_cast<int>(kv.get_int("optimizer.epochs", c.optimizer.epochs));
  c.optimizer.batch_size = static_cast<int>(kv.get_int("optimizer.batch_size", c.optimizer.batch_size));
  c.optimizer.seed = static_cast<std::uint64_t>(kv.get_int("optimizer.seed", 0));
  c.stride = kv.get_double("data.stride", c.grid.duration / 2.0);
  c.holdout_fraction = kv.get_double("data.holdout", c.holdout_fraction);
  c.paths.manifest = kv.get_string("paths.manifest", "");
  c.paths.alignments = kv.get_string("paths.alignments", "");
  c.paths.lexicon = kv.get_string("paths.lexicon", "");
  c.paths.clips = kv.get_string("paths.clips", "");
  c.paths.checkpoint = kv.get_string("paths.checkpoint", "");
  c.paths.report_dir = kv.get_string("paths.report_dir", "");
  c.features.clip_duration = c.grid.duration;
  return c;
}

void RunConfig::validate() const {
  GridConfig g = grid;
  g.keywords = std::max(1, g.keywords);
  g.validate();
  features.validate();
  loss.validate();
  if (!(stride > 0)) throw InvalidInput("data.stride must be positive");
  if (!(holdout_fraction >= 0 && holdout_fraction < 1)) {
    throw InvalidInput("data.holdout must be in [0, 1)");
  }
  if (optimizer.epochs < 0) throw InvalidInput("optimizer.epochs must be non-negative");
  if (optimizer.batch_size < 1) throw InvalidInput("optimizer.batch_size must be >= 1");
}

}  // namespace speechyolo
