#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace speechyolo {

// Geometry of the detection grid: a clip of `duration` seconds split into
// `cells` equal sections, each predicting `boxes` timing boxes and
// `keywords` class scores.
struct GridConfig {
  double duration = 1.0;
  int cells = 6;
  int boxes = 2;
  int keywords = 1;

  double cell_width() const { return duration / cells; }
  // Values predicted per cell: (t, dt, conf) per box, then class scores.
  int cell_stride() const { return 3 * boxes + keywords; }
  int output_dim() const { return cells * cell_stride(); }

  void validate() const;
  bool operator==(const GridConfig&) const = default;
};

struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
  double midpoint() const { return 0.5 * (start + end); }
  bool operator==(const Interval&) const = default;
};

struct Event {
  int keyword = 0;
  double t_start = 0.0;
  double t_end = 0.0;

  Interval interval() const { return {t_start, t_end}; }
  bool operator==(const Event&) const = default;
};

// Center offset within the cell and duration relative to the clip, both
// normalized to [0, 1], plus the localization confidence.
struct TimingBox {
  double t = 0.0;
  double dt = 0.0;
  double conf = 0.0;
  bool operator==(const TimingBox&) const = default;
};

struct CellPrediction {
  std::vector<double> class_scores;  // size L
  std::vector<TimingBox> boxes;      // size B
  bool operator==(const CellPrediction&) const = default;
};

struct PredictionGrid {
  std::vector<CellPrediction> cells;

  // A grid of zeros shaped by `cfg`.
  static PredictionGrid zeros(const GridConfig& cfg);
  // Throws InvalidInput when the shape does not match `cfg`.
  void check_shape(const GridConfig& cfg) const;
  bool operator==(const PredictionGrid&) const = default;
};

struct TargetCell {
  std::optional<Event> event;  // the event this cell is responsible for
  TimingBox box;               // encoded (t, dt, conf = 1) when assigned

  bool assigned() const { return event.has_value(); }
  // The keyword indicator: true iff this cell holds keyword k.
  bool holds(int keyword) const { return event && event->keyword == keyword; }
};

struct TargetGrid {
  std::vector<TargetCell> cells;
  int collisions = 0;  // events dropped because their cell was taken

  int assigned_count() const;
};

struct DetectionRecord {
  int keyword = 0;
  Interval interval;
  double score = 0.0;  // p_c(k) * p_b
  int cell = 0;
  int box = 0;
  bool operator==(const DetectionRecord&) const = default;
};

enum class AssignMode {
  kCenter,        // cell containing the event midpoint
  kPaperLiteral,  // cell containing the whole event, if any
};

// Half-open span [i*T/C, (i+1)*T/C) of cell i.
Interval cell_span(const GridConfig& cfg, int cell);

std::optional<int> assign_cell(const Event& event, const GridConfig& cfg,
                               AssignMode mode = AssignMode::kCenter);

// Same-cell collisions keep the longer event; on equal length the earlier
// one in `events` wins.
TargetGrid encode_targets(std::span<const Event> events, const GridConfig& cfg,
                          AssignMode mode = AssignMode::kCenter);

// Absolute interval described by `box` in `cell`, clipped to [0, T].
Interval box_to_interval(int cell, const TimingBox& box, const GridConfig& cfg);

// Per-cell argmax of p_c(k) * conf_j over keywords and boxes; one record per
// cell whose best product exceeds theta. Ties go to the lowest k, then j.
std::vector<DetectionRecord> decode(const PredictionGrid& grid, double theta,
                                    const GridConfig& cfg);

double iou(const Interval& a, const Interval& b);

// The grid a perfect model would output for `targets`: the target box in
// slot 0 with conf 1, other boxes zero, one-hot class scores.
PredictionGrid render_targets(const TargetGrid& targets, const GridConfig& cfg);

// Flat layout per cell: (t, dt, conf) for each box, then L class scores.
std::vector<double> grid_to_vector(const PredictionGrid& grid);
PredictionGrid vector_to_grid(std::span<const double> values, const GridConfig& cfg);

}  // namespace speechyolo
