#include "speechyolo/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

bool contains_closed(const Event& ref, double t) {
  return t >= ref.t_start && t <= ref.t_end;
}

std::vector<std::size_t> by_descending_score(std::span<const DetectionRecord> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

MatchResult match_detections(std::span<const DetectionRecord> dets,
                             std::span<const Event> refs) {
  MatchResult m;
  std::vector<bool> used(refs.size(), false);
  for (std::size_t d : by_descending_score(dets)) {
    const DetectionRecord& det = dets[d];
    const double mid = det.interval.midpoint();
    bool matched = false;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      if (used[r] || refs[r].keyword != det.keyword || !contains_closed(refs[r], mid)) continue;
      used[r] = true;
      m.true_positives.emplace_back(det, refs[r]);
      matched = true;
      break;
    }
    if (!matched) m.false_positives.push_back(det);
  }
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (!used[r]) m.false_negatives.push_back(refs[r]);
  }
  return m;
}

Counts counts_of(const MatchResult& m) {
  return {static_cast<long>(m.true_positives.size()),
          static_cast<long>(m.false_positives.size()),
          static_cast<long>(m.false_negatives.size())};
}

PrecisionRecall precision_recall_f1(const Counts& c) {
  PrecisionRecall pr;
  if (c.tp + c.fp > 0) pr.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) pr.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  if (pr.precision + pr.recall > 0) {
    pr.f1 = 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall);
  }
  return pr;
}

PrecisionRecall precision_recall_f1(const MatchResult& m) {
  return precision_recall_f1(counts_of(m));
}

std::vector<DetectionRecord> above_threshold(std::span<const DetectionRecord> dets,
                                             double theta) {
  std::vector<DetectionRecord> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [theta](const DetectionRecord& d) { return d.score > theta; });
  return out;
}

Counts pooled_counts(std::span<const ScoredUtterance> corpus, double theta) {
  Counts total;
  for (const auto& u : corpus) {
    total += counts_of(match_detections(above_threshold(u.detections, theta), u.references));
  }
  return total;
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(i * 0.05);
  return grid;
}

SweepResult sweep_threshold(std::span<const ScoredUtterance> corpus,
                            std::span<const double> thetas) {
  if (thetas.empty()) throw InvalidInput("sweep_threshold: empty theta grid");
  SweepResult result;
  bool first = true;
  for (double theta : thetas) {
    PrecisionRecall pr = precision_recall_f1(pooled_counts(corpus, theta));
    result.curve.push_back({theta, pr});
    if (first || pr.f1 > result.best.f1) {
      result.best = pr;
      result.best_theta = theta;
      first = false;
    }
  }
  return result;
}

double actual_accuracy(std::span<const DetectionRecord> dets, std::span<const Event> refs) {
  if (refs.empty()) return 0.0;
  std::vector<bool> used(dets.size(), false);
  const auto order = by_descending_score(dets);
  long hits = 0;
  for (const Event& ref : refs) {
    for (std::size_t d : order) {
      if (used[d] || dets[d].keyword != ref.keyword) continue;
      if (!contains_closed(ref, dets[d].interval.midpoint())) continue;
      used[d] = true;
      ++hits;
      break;
    }
  }
  return static_cast<double>(hits) / refs.size();
}

double actual_accuracy(std::span<const ScoredUtterance> corpus, double theta) {
  double hits = 0.0;
  std::size_t total = 0;
  for (const auto& u : corpus) {
    if (u.references.empty()) continue;
    hits += actual_accuracy(above_threshold(u.detections, theta), u.references) *
            static_cast<double>(u.references.size());
    total += u.references.size();
  }
  return total > 0 ? hits / total : 0.0;
}

std::optional<double> mean_iou(std::span<const ScoredUtterance> corpus, double theta,
                               IouMode mode) {
  double sum = 0.0;
  long pairs = 0;
  for (const auto& u : corpus) {
    if (mode == IouMode::kMatchedOnly) {
      auto m = match_detections(above_threshold(u.detections, theta), u.references);
      for (const auto& [det, ref] : m.true_positives) {
        sum += iou(det.interval, ref.interval());
        ++pairs;
      }
      continue;
    }
    for (const Event& ref : u.references) {
      std::optional<double> best;
      for (const auto& det : u.detections) {
        if (det.keyword != ref.keyword) continue;
        double v = iou(det.interval, ref.interval());
        if (!best || v > *best) best = v;
      }
      if (best) {
        sum += *best;
        ++pairs;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / pairs;
}

TwvConfig TwvConfig::nist(double total_speech_seconds) {
  TwvConfig cfg;
  cfg.p_target = 1e-4;
  cfg.beta = 0.1 * (1.0 / cfg.p_target - 1.0);
  cfg.total_speech_seconds = total_speech_seconds;
  return cfg;
}

void TwvConfig::validate() const {
  if (!(beta > 0)) throw InvalidInput("TWV beta must be positive");
  if (!(p_target > 0 && p_target < 1)) throw InvalidInput("TWV p_target must be in (0, 1)");
  if (!(total_speech_seconds > 0)) throw InvalidInput("TWV needs positive speech duration");
}

std::map<int, KeywordCounts> keyword_counts(std::span<const ScoredUtterance> corpus,
                                            double theta) {
  std::map<int, KeywordCounts> counts;
  for (const auto& u : corpus) {
    for (const auto& ref : u.references) ++counts[ref.keyword].n_true;
    auto m = match_detections(above_threshold(u.detections, theta), u.references);
    for (const auto& tp : m.true_positives) ++counts[tp.first.keyword].tp;
    for (const auto& fp : m.false_positives) ++counts[fp.keyword].fp;
  }
  return counts;
}

std::optional<double> twv_from_counts(const std::map<int, KeywordCounts>& counts,
                                      const TwvConfig& cfg) {
  cfg.validate();
  double loss = 0.0;
  int keywords = 0;
  for (const auto& [k, c] : counts) {
    if (c.n_true == 0) continue;
    const double p_miss = 1.0 - static_cast<double>(c.tp) / c.n_true;
    const double p_fa = static_cast<double>(c.fp) / (cfg.total_speech_seconds - c.n_true);
    loss += p_miss + cfg.beta * p_fa;
    ++keywords;
  }
  if (keywords == 0) return std::nullopt;
  return 1.0 - loss / keywords;
}

std::optional<double> atwv(std::span<const ScoredUtterance> corpus, double theta,
                           const TwvConfig& cfg) {
  return twv_from_counts(keyword_counts(corpus, theta), cfg);
}

std::optional<MtwvResult> mtwv(std::span<const ScoredUtterance> corpus,
                               std::span<const double> thetas, const TwvConfig& cfg) {
  if (thetas.empty()) throw InvalidInput("mtwv: empty theta grid");
  MtwvResult result;
  bool first = true;
  for (double theta : thetas) {
    auto value = atwv(corpus, theta, cfg);
    if (!value) return std::nullopt;
    result.curve.emplace_back(theta, *value);
    if (first || *value > result.value) {
      result.value = *value;
      result.best_theta = theta;
      first = false;
    }
  }
  return result;
}

}  // namespace speechyolo
