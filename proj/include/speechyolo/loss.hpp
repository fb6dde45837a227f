#pragma once

#include <optional>
#include <string>
#include <vector>

#include "speechyolo/grid.hpp"

namespace speechyolo {

struct LossWeights {
  double lambda_center = 5.0;
  double lambda_duration = 5.0;
  double lambda_noobj = 0.5;

  void validate() const;
};

enum class LossMode {
  // Coordinate and object-confidence terms on the responsible box only;
  // every other box is pushed toward zero confidence; class term is the
  // squared error against the one-hot target.
  kYolo,
  // Literal five-sum form: all B boxes of an assigned cell carry
  // the coordinate and confidence terms, and the class term only rewards
  // the true keyword.
  kPaperLiteral,
};

// Unweighted sums of the five terms. total applies the weights:
// l1*center + l2*duration + obj_conf + l3*noobj_conf + class.
struct LossBreakdown {
  double center = 0.0;
  double duration = 0.0;
  double obj_conf = 0.0;
  double noobj_conf = 0.0;
  double class_term = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double factor) const;
  // Single-line JSON object, used for training logs.
  std::string to_json() const;
};

struct LossResult {
  LossBreakdown breakdown;
  PredictionGrid gradient;  // d total / d prediction entry, same shape as pred
};

// Durations below this are clamped before the square root.
inline constexpr double kMinDuration = 1e-6;

// Box whose interval overlaps the target interval most; ties to lowest j.
int responsible_box(const TimingBox& target_box, const CellPrediction& pred_cell, int cell,
                    const GridConfig& cfg);

// Responsible box per cell (-1 for unassigned cells).
std::vector<int> responsible_boxes(const PredictionGrid& pred, const TargetGrid& target,
                                   const GridConfig& cfg);

// Loss and analytic gradient. `responsible`, when given, overrides the
// IOU-based box selection (used to freeze the assignment while probing the
// loss numerically). Throws InvalidInput on shape mismatch.
LossResult speechyolo_loss(const PredictionGrid& pred, const TargetGrid& target,
                           const GridConfig& cfg, const LossWeights& weights,
                           LossMode mode = LossMode::kYolo,
                           const std::optional<std::vector<int>>& responsible = std::nullopt);

// Max relative error between the analytic gradient and fourth-order central
// differences at step `epsilon` over every prediction entry. Relative error is
// |a - n| / max(|a|, |n|, 1e-4) so vanishing components are compared on an
// absolute scale. Entries must stay in (2 * epsilon, 1 - 2 * epsilon). The responsible
// boxes are frozen at `pred` so the probe never crosses a selection switch.
double loss_gradient_check(const PredictionGrid& pred, const TargetGrid& target,
                           const GridConfig& cfg, const LossWeights& weights, LossMode mode,
                           double epsilon);

}  // namespace speechyolo
