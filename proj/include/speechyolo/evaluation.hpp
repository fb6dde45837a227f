#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "speechyolo/corpus.hpp"
#include "speechyolo/features.hpp"
#include "speechyolo/lexicon.hpp"
#include "speechyolo/metrics.hpp"
#include "speechyolo/network.hpp"

namespace speechyolo {

// Clip audio plus reference events, ready for inference.
struct EvalClip {
  std::string clip_id;
  Waveform samples;
  std::vector<Event> events;
};

// Runs the model on every clip (optionally noise-injected) and keeps every
// per-cell detection (theta = 0); thresholds are applied by the measures.
// Clip i is corrupted with seed derived from (seed, i).
std::vector<ScoredUtterance> score_clips(const Model& model, const FeatureConfig& features,
                                         std::span<const EvalClip> clips,
                                         std::optional<NoiseKind> noise = std::nullopt,
                                         double alpha = 0.0, std::uint64_t seed = 0);

struct EvaluationReport {
  double theta = 0.0;
  bool swept = false;
  PrecisionRecall pr;
  double actual = 0.0;
  std::optional<double> mean_iou;         // matched pairs at theta
  std::optional<double> mean_iou_oracle;  // best same-keyword box per reference
  std::optional<double> atwv;             // at theta
  std::optional<MtwvResult> mtwv;
  TwvConfig twv;
  std::map<int, KeywordCounts> per_keyword;
  std::vector<SweepPoint> curve;
  std::vector<double> curve_actual;
  std::vector<std::optional<double>> curve_twv;

  nlohmann::json to_json(const Lexicon& lexicon) const;
  // theta,precision,recall,f1,actual,twv
  std::string curve_csv() const;
};

// All measures at a fixed theta, or at the max-F1 theta of `thetas` when
// `fixed_theta` is empty. The curve always spans `thetas`.
EvaluationReport evaluate_corpus(std::span<const ScoredUtterance> corpus,
                                 std::optional<double> fixed_theta,
                                 std::span<const double> thetas, const TwvConfig& twv);

struct NoiseRow {
  double alpha = 0.0;
  double theta = 0.0;
  PrecisionRecall pr;
  double actual = 0.0;
};

// One row per alpha, every row scored at the same theta. Throws
// InvalidInput for unsorted or negative alphas.
std::vector<NoiseRow> noise_robustness_curve(const Model& model, const FeatureConfig& features,
                                             std::span<const EvalClip> clips, NoiseKind kind,
                                             std::span<const double> alphas, double theta,
                                             std::uint64_t seed);

std::string noise_curve_csv(std::span<const NoiseRow> rows, NoiseKind kind);

}  // namespace speechyolo
