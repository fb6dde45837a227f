#include "speechyolo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "speechyolo/error.hpp"

namespace speechyolo {

void GridConfig::validate() const {
  if (!(duration > 0)) throw InvalidInput("grid duration must be positive");
  if (cells < 1 || boxes < 1 || keywords < 1) {
    throw InvalidInput("grid requires cells, boxes, keywords >= 1");
  }
}

PredictionGrid PredictionGrid::zeros(const GridConfig& cfg) {
  PredictionGrid grid;
  grid.cells.assign(cfg.cells, CellPrediction{std::vector<double>(cfg.keywords, 0.0),
                                              std::vector<TimingBox>(cfg.boxes)});
  return grid;
}

void PredictionGrid::check_shape(const GridConfig& cfg) const {
  if (static_cast<int>(cells.size()) != cfg.cells) {
    throw InvalidInput("prediction grid has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(cfg.cells));
  }
  for (const auto& cell : cells) {
    if (static_cast<int>(cell.class_scores.size()) != cfg.keywords ||
        static_cast<int>(cell.boxes.size()) != cfg.boxes) {
      throw InvalidInput("prediction cell shape does not match grid config");
    }
  }
}

int TargetGrid::assigned_count() const {
  return static_cast<int>(
      std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.assigned(); }));
}

Interval cell_span(const GridConfig& cfg, int cell) {
  if (cell < 0 || cell >= cfg.cells) {
    throw InvalidInput("cell index " + std::to_string(cell) + " out of range");
  }
  return {cell * cfg.duration / cfg.cells, (cell + 1) * cfg.duration / cfg.cells};
}

std::optional<int> assign_cell(const Event& event, const GridConfig& cfg, AssignMode mode) {
  if (mode == AssignMode::kCenter) {
    const double mid = event.interval().midpoint();
    int i = std::clamp(static_cast<int>(std::floor(mid * cfg.cells / cfg.duration)), 0,
                       cfg.cells - 1);
    // Snap against the exact span boundaries so the rule matches cell_span.
    while (i + 1 < cfg.cells && mid >= cell_span(cfg, i + 1).start) ++i;
    while (i > 0 && mid < cell_span(cfg, i).start) --i;
    return i;
  }
  for (int i = 0; i < cfg.cells; ++i) {
    Interval span = cell_span(cfg, i);
    if (event.t_start >= span.start && event.t_end <= span.end) return i;
  }
  return std::nullopt;
}

TargetGrid encode_targets(std::span<const Event> events, const GridConfig& cfg,
                          AssignMode mode) {
  TargetGrid grid;
  grid.cells.resize(cfg.cells);
  const double width = cfg.cell_width();
  for (const Event& e : events) {
    auto cell = assign_cell(e, cfg, mode);
    if (!cell) continue;
    TargetCell& slot = grid.cells[*cell];
    if (slot.event) {
      ++grid.collisions;
      if (e.interval().length() <= slot.event->interval().length()) continue;
    }
    slot.event = e;
    slot.box.t = (e.interval().midpoint() - cell_span(cfg, *cell).start) / width;
    slot.box.dt = e.interval().length() / cfg.duration;
    slot.box.conf = 1.0;
  }
  return grid;
}

Interval box_to_interval(int cell, const TimingBox& box, const GridConfig& cfg) {
  const double center = cell_span(cfg, cell).start + box.t * cfg.cell_width();
  const double half = box.dt * cfg.duration / 2.0;
  return {std::clamp(center - half, 0.0, cfg.duration),
          std::clamp(center + half, 0.0, cfg.duration)};
}

std::vector<DetectionRecord> decode(const PredictionGrid& grid, double theta,
                                    const GridConfig& cfg) {
  grid.check_shape(cfg);
  std::vector<DetectionRecord> out;
  for (int i = 0; i < cfg.cells; ++i) {
    const CellPrediction& cell = grid.cells[i];
    double best = -1.0;
    int best_k = 0, best_j = 0;
    for (int k = 0; k < cfg.keywords; ++k) {
      for (int j = 0; j < cfg.boxes; ++j) {
        double p = cell.class_scores[k] * cell.boxes[j].conf;
        if (p > best) {
          best = p;
          best_k = k;
          best_j = j;
        }
      }
    }
    if (best > theta) {
      out.push_back({best_k, box_to_interval(i, cell.boxes[best_j], cfg), best, i, best_j});
    }
  }
  return out;
}

double iou(const Interval& a, const Interval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

PredictionGrid render_targets(const TargetGrid& targets, const GridConfig& cfg) {
  PredictionGrid grid = PredictionGrid::zeros(cfg);
  for (int i = 0; i < cfg.cells; ++i) {
    const TargetCell& t = targets.cells[i];
    if (!t.assigned()) continue;
    grid.cells[i].boxes[0] = t.box;
    grid.cells[i].class_scores[t.event->keyword] = 1.0;
  }
  return grid;
}

std::vector<double> grid_to_vector(const PredictionGrid& grid) {
  std::vector<double> out;
  for (const auto& cell : grid.cells) {
    for (const auto& b : cell.boxes) {
      out.push_back(b.t);
      out.push_back(b.dt);
      out.push_back(b.conf);
    }
    out.insert(out.end(), cell.class_scores.begin(), cell.class_scores.end());
  }
  return out;
}

PredictionGrid vector_to_grid(std::span<const double> values, const GridConfig& cfg) {
  if (static_cast<int>(values.size()) != cfg.output_dim()) {
    throw InvalidInput("vector_to_grid: expected " + std::to_string(cfg.output_dim()) +
                       " values, got " + std::to_string(values.size()));
  }
  PredictionGrid grid = PredictionGrid::zeros(cfg);
  auto it = values.begin();
  for (auto& cell : grid.cells) {
    for (auto& b : cell.boxes) {
      b.t = *it++;
      b.dt = *it++;
      b.conf = *it++;
    }
    for (auto& s : cell.class_scores) s = *it++;
  }
  return grid;
}

}  // namespace speechyolo
