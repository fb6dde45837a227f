#include "speechyolo/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "speechyolo/error.hpp"

namespace speechyolo {

void LossWeights::validate() const {
  if (lambda_center < 0 || lambda_duration < 0 || lambda_noobj < 0) {
    throw InvalidInput("loss weights must be non-negative");
  }
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  center += o.center;
  duration += o.duration;
  obj_conf += o.obj_conf;
  noobj_conf += o.noobj_conf;
  class_term += o.class_term;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double f) const {
  return {center * f, duration * f, obj_conf * f, noobj_conf * f, class_term * f, total * f};
}

std::string LossBreakdown::to_json() const {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "{\"center\":%.9g,\"duration\":%.9g,\"obj_conf\":%.9g,\"noobj_conf\":%.9g,"
                "\"class\":%.9g,\"total\":%.9g}",
                center, duration, obj_conf, noobj_conf, class_term, total);
  return buf;
}

int responsible_box(const TimingBox& target_box, const CellPrediction& pred_cell, int cell,
                    const GridConfig& cfg) {
  const Interval truth = box_to_interval(cell, target_box, cfg);
  int best = 0;
  double best_iou = -1.0;
  for (int j = 0; j < static_cast<int>(pred_cell.boxes.size()); ++j) {
    double v = iou(box_to_interval(cell, pred_cell.boxes[j], cfg), truth);
    if (v > best_iou) {
      best_iou = v;
      best = j;
    }
  }
  return best;
}

std::vector<int> responsible_boxes(const PredictionGrid& pred, const TargetGrid& target,
                                   const GridConfig& cfg) {
  std::vector<int> out(cfg.cells, -1);
  for (int i = 0; i < cfg.cells; ++i) {
    if (target.cells[i].assigned()) {
      out[i] = responsible_box(target.cells[i].box, pred.cells[i], i, cfg);
    }
  }
  return out;
}

LossResult speechyolo_loss(const PredictionGrid& pred, const TargetGrid& target,
                           const GridConfig& cfg, const LossWeights& w, LossMode mode,
                           const std::optional<std::vector<int>>& responsible) {
  pred.check_shape(cfg);
  if (static_cast<int>(target.cells.size()) != cfg.cells) {
    throw InvalidInput("target grid cell count does not match grid config");
  }
  if (responsible && static_cast<int>(responsible->size()) != cfg.cells) {
    throw InvalidInput("responsible box list has wrong length");
  }

  LossResult result{{}, PredictionGrid::zeros(cfg)};
  LossBreakdown& lb = result.breakdown;

  for (int i = 0; i < cfg.cells; ++i) {
    const CellPrediction& cell = pred.cells[i];
    const TargetCell& tcell = target.cells[i];
    CellPrediction& grad = result.gradient.cells[i];

    if (!tcell.assigned()) {
      for (int j = 0; j < cfg.boxes; ++j) {
        const double c = cell.boxes[j].conf;
        lb.noobj_conf += c * c;
        grad.boxes[j].conf += w.lambda_noobj * 2.0 * c;
      }
      continue;
    }

    const TimingBox& tb = tcell.box;
    const double sqrt_target_dt = std::sqrt(std::max(tb.dt, 0.0));
    int resp = -1;
    if (mode == LossMode::kYolo) {
      resp = responsible ? (*responsible)[i] : responsible_box(tb, cell, i, cfg);
    }

    for (int j = 0; j < cfg.boxes; ++j) {
      const TimingBox& b = cell.boxes[j];
      TimingBox& g = grad.boxes[j];
      const bool carries_object = mode == LossMode::kPaperLiteral || j == resp;
      if (!carries_object) {
        lb.noobj_conf += b.conf * b.conf;
        g.conf += w.lambda_noobj * 2.0 * b.conf;
        continue;
      }
      const double dc = b.t - tb.t;
      lb.center += dc * dc;
      g.t += w.lambda_center * 2.0 * dc;

      // Straight-through clamp: the derivative is evaluated at the clamped
      // value so it stays finite at dt = 0.
      const double s = std::sqrt(std::max(b.dt, kMinDuration));
      const double ds = s - sqrt_target_dt;
      lb.duration += ds * ds;
      g.dt += w.lambda_duration * ds / s;

      const double dconf = 1.0 - b.conf;
      lb.obj_conf += dconf * dconf;
      g.conf += -2.0 * dconf;
    }

    const int k_true = tcell.event->keyword;
    for (int k = 0; k < cfg.keywords; ++k) {
      const double p = cell.class_scores[k];
      if (mode == LossMode::kYolo) {
        const double diff = (k == k_true ? 1.0 : 0.0) - p;
        lb.class_term += diff * diff;
        grad.class_scores[k] += -2.0 * diff;
      } else if (k == k_true) {
        const double diff = 1.0 - p;
        lb.class_term += diff * diff;
        grad.class_scores[k] += -2.0 * diff;
      }
    }
  }

  lb.total = w.lambda_center * lb.center + w.lambda_duration * lb.duration + lb.obj_conf +
             w.lambda_noobj * lb.noobj_conf + lb.class_term;
  return result;
}

double loss_gradient_check(const PredictionGrid& pred, const TargetGrid& target,
                           const GridConfig& cfg, const LossWeights& w, LossMode mode,
                           double epsilon) {
  if (!(epsilon > 0)) throw InvalidInput("epsilon must be positive");
  const auto frozen = responsible_boxes(pred, target, cfg);
  const auto analytic = grid_to_vector(speechyolo_loss(pred, target, cfg, w, mode, frozen).gradient);
  std::vector<double> x = grid_to_vector(pred);

  auto total_at = [&](const std::vector<double>& v) {
    return speechyolo_loss(vector_to_grid(v, cfg), target, cfg, w, mode, frozen).breakdown.total;
  };

  double worst = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double x0 = x[n];
    auto at = [&](double offset) {
      x[n] = x0 + offset;
      return total_at(x);
    };
    // Five-point central stencil: the duration term is quadratic in sqrt(dt),
    // so the three-point rule leaves an O(eps^2 / dt^2.5) error.
    const double numeric =
        (8.0 * (at(epsilon) - at(-epsilon)) - (at(2 * epsilon) - at(-2 * epsilon))) / (12.0 * epsilon);
    x[n] = x0;
    const double denom = std::max({std::abs(analytic[n]), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic[n] - numeric) / denom);
  }
  return worst;
}

}  // namespace speechyolo
