#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "speechyolo/grid.hpp"

namespace speechyolo::testing {

// Small generator helpers for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin() { return integer(0, 1) == 1; }

  GridConfig grid(int max_cells, int max_boxes, int max_keywords) {
    GridConfig g;
    g.duration = 1.0;
    g.cells = integer(1, max_cells);
    g.boxes = integer(1, max_boxes);
    g.keywords = integer(1, max_keywords);
    return g;
  }

  // Entries strictly inside (lo, hi) so finite differences stay feasible.
  PredictionGrid prediction(const GridConfig& cfg, double lo = 0.0, double hi = 1.0) {
    PredictionGrid p = PredictionGrid::zeros(cfg);
    for (auto& cell : p.cells) {
      for (auto& s : cell.class_scores) s = uniform(lo, hi);
      for (auto& b : cell.boxes) b = {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)};
    }
    return p;
  }
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("speechyolo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace speechyolo::testing

// Short alias that does not clash with the gtest namespace.
namespace speechyolo {
namespace oracle = testing;
}  // namespace speechyolo
