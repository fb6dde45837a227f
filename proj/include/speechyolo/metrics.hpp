#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speechyolo/grid.hpp"

namespace speechyolo {

// Detections and references for one clip or utterance. Corpus-level
// measures pool counts over a list of these.
struct ScoredUtterance {
  std::string utt_id;
  std::vector<DetectionRecord> detections;
  std::vector<Event> references;
};

struct MatchResult {
  std::vector<std::pair<DetectionRecord, Event>> true_positives;
  std::vector<DetectionRecord> false_positives;
  std::vector<Event> false_negatives;
};

struct Counts {
  long tp = 0, fp = 0, fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy one-to-one matching in descending score order (stable for equal
// scores). A detection matches the first unmatched reference of the same
// keyword whose closed span contains the detection's interval midpoint.
MatchResult match_detections(std::span<const DetectionRecord> dets,
                             std::span<const Event> refs);

Counts counts_of(const MatchResult& m);
PrecisionRecall precision_recall_f1(const Counts& c);
PrecisionRecall precision_recall_f1(const MatchResult& m);

// Detections with score strictly above theta.
std::vector<DetectionRecord> above_threshold(std::span<const DetectionRecord> dets, double theta);

// Corpus-pooled counts at threshold theta.
Counts pooled_counts(std::span<const ScoredUtterance> corpus, double theta);

struct SweepPoint {
  double theta = 0.0;
  PrecisionRecall pr;
};

struct SweepResult {
  double best_theta = 0.0;
  PrecisionRecall best;
  std::vector<SweepPoint> curve;
};

// 0.05, 0.10, ..., 0.95.
std::vector<double> default_theta_grid();

// Re-matches at every theta; picks the max-F1 theta, ties to the smallest.
SweepResult sweep_threshold(std::span<const ScoredUtterance> corpus,
                            std::span<const double> thetas);

// Fraction of references for which a same-keyword detection's interval
// midpoint lies inside the closed reference span, each detection used at
// most once in descending score order. Zero when there are no references.
double actual_accuracy(std::span<const DetectionRecord> dets, std::span<const Event> refs);
double actual_accuracy(std::span<const ScoredUtterance> corpus, double theta);

enum class IouMode {
  kMatchedOnly,       // mean over true-positive pairs at the threshold
  kOracleAssignment,  // each reference paired with its best same-keyword detection
};

// nullopt when no pairs exist. The threshold is ignored in oracle mode.
std::optional<double> mean_iou(std::span<const ScoredUtterance> corpus, double theta,
                               IouMode mode);

struct TwvConfig {
  double beta = 999.9;
  double p_target = 1e-4;
  double total_speech_seconds = 0.0;

  // beta = cost_over_value * (1 / p_target - 1); the NIST 2006 STD setting
  // uses cost/value 0.1 and p_target 1e-4, giving 999.9.
  static TwvConfig nist(double total_speech_seconds);
  void validate() const;
};

struct KeywordCounts {
  long n_true = 0, tp = 0, fp = 0;
};

// Per-keyword true-reference, hit and false-alarm counts at theta.
std::map<int, KeywordCounts> keyword_counts(std::span<const ScoredUtterance> corpus, double theta);

// 1 - mean_k [P_miss(k) + beta * P_FA(k)] over keywords with references;
// P_FA(k) = FP(k) / (total_speech_seconds - N_true(k)). nullopt when no
// keyword has references.
std::optional<double> twv_from_counts(const std::map<int, KeywordCounts>& counts,
                                      const TwvConfig& cfg);
std::optional<double> atwv(std::span<const ScoredUtterance> corpus, double theta,
                           const TwvConfig& cfg);

struct MtwvResult {
  double best_theta = 0.0;
  double value = 0.0;
  std::vector<std::pair<double, double>> curve;  // (theta, twv)
};

// Max ATWV over the grid, ties to the smallest theta. nullopt when ATWV is
// undefined.
std::optional<MtwvResult> mtwv(std::span<const ScoredUtterance> corpus,
                               std::span<const double> thetas, const TwvConfig& cfg);

}  // namespace speechyolo
