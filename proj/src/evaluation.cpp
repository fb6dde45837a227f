#include "speechyolo/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<ScoredUtterance> score_clips(const Model& model, const FeatureConfig& features,
                                         std::span<const EvalClip> clips,
                                         std::optional<NoiseKind> noise, double alpha,
                                         std::uint64_t seed) {
  const GridConfig& grid = model.head().grid;
  std::vector<ScoredUtterance> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const EvalClip& clip = clips[i];
    Waveform audio = noise ? inject_noise(clip.samples, *noise, alpha,
                                          seed * 0x9E3779B97F4A7C15ull + i)
                           : clip.samples;
    auto pred = model.forward(clip_features(audio, features));
    out.push_back({clip.clip_id, decode(pred, 0.0, grid), clip.events});
  }
  return out;
}

EvaluationReport evaluate_corpus(std::span<const ScoredUtterance> corpus,
                                 std::optional<double> fixed_theta,
                                 std::span<const double> thetas, const TwvConfig& twv) {
  EvaluationReport r;
  r.twv = twv;
  if (!thetas.empty()) {
    auto sweep = sweep_threshold(corpus, thetas);
    r.curve = sweep.curve;
    for (double t : thetas) {
      r.curve_actual.push_back(actual_accuracy(corpus, t));
      r.curve_twv.push_back(atwv(corpus, t, twv));
    }
    r.theta = sweep.best_theta;
    r.mtwv = mtwv(corpus, thetas, twv);
  }
  r.swept = !fixed_theta.has_value();
  if (fixed_theta) r.theta = *fixed_theta;
  if (r.swept && thetas.empty()) throw InvalidInput("evaluate_corpus: no theta to use");

  r.pr = precision_recall_f1(pooled_counts(corpus, r.theta));
  r.actual = actual_accuracy(corpus, r.theta);
  r.mean_iou = mean_iou(corpus, r.theta, IouMode::kMatchedOnly);
  r.mean_iou_oracle = mean_iou(corpus, r.theta, IouMode::kOracleAssignment);
  r.atwv = atwv(corpus, r.theta, twv);
  r.per_keyword = keyword_counts(corpus, r.theta);
  return r;
}

nlohmann::json EvaluationReport::to_json(const Lexicon& lexicon) const {
  nlohmann::json j;
  j["theta"] = theta;
  j["theta_selection"] = swept ? "max_f1_sweep" : "fixed";
  j["precision"] = pr.precision;
  j["recall"] = pr.recall;
  j["f1"] = pr.f1;
  j["actual"] = actual;
  j["mean_iou"] = optional_json(mean_iou);
  j["mean_iou_oracle"] = optional_json(mean_iou_oracle);
  j["atwv"] = optional_json(atwv);
  if (mtwv) {
    j["mtwv"] = {{"value", mtwv->value}, {"theta", mtwv->best_theta}};
  } else {
    j["mtwv"] = nullptr;
  }
  j["twv_config"] = {{"beta", twv.beta},
                     {"p_target", twv.p_target},
                     {"total_speech_seconds", twv.total_speech_seconds}};
  nlohmann::json kw = nlohmann::json::object();
  for (const auto& [k, c] : per_keyword) {
    kw[lexicon.word(k)] = {{"n_true", c.n_true}, {"tp", c.tp}, {"fp", c.fp}};
  }
  j["per_keyword"] = kw;
  nlohmann::json curve_json = nlohmann::json::array();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    curve_json.push_back({{"theta", curve[i].theta},
                          {"precision", curve[i].pr.precision},
                          {"recall", curve[i].pr.recall},
                          {"f1", curve[i].pr.f1},
                          {"actual", curve_actual[i]},
                          {"twv", optional_json(curve_twv[i])}});
  }
  j["curve"] = curve_json;
  return j;
}

std::string EvaluationReport::curve_csv() const {
  std::string out = "theta,precision,recall,f1,actual,twv\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += num(curve[i].theta) + "," + num(curve[i].pr.precision) + "," +
           num(curve[i].pr.recall) + "," + num(curve[i].pr.f1) + "," + num(curve_actual[i]) +
           "," + (curve_twv[i] ? num(*curve_twv[i]) : std::string("nan")) + "\n";
  }
  return out;
}

std::vector<NoiseRow> noise_robustness_curve(const Model& model, const FeatureConfig& features,
                                             std::span<const EvalClip> clips, NoiseKind kind,
                                             std::span<const double> alphas, double theta,
                                             std::uint64_t seed) {
  if (alphas.empty()) throw InvalidInput("noise curve needs at least one alpha");
  if (!std::is_sorted(alphas.begin(), alphas.end()) || alphas.front() < 0) {
    throw InvalidInput("alphas must be non-negative and sorted ascending");
  }
  std::vector<NoiseRow> rows;
  for (double alpha : alphas) {
    auto scored = score_clips(model, features, clips, kind, alpha, seed);
    rows.push_back({alpha, theta, precision_recall_f1(pooled_counts(scored, theta)),
                    actual_accuracy(scored, theta)});
  }
  return rows;
}

std::string noise_curve_csv(std::span<const NoiseRow> rows, NoiseKind kind) {
  std::string out = "kind,alpha,theta,precision,recall,f1,actual\n";
  for (const auto& r : rows) {
    out += noise_kind_name(kind) + "," + num(r.alpha) + "," + num(r.theta) + "," +
           num(r.pr.precision) + "," + num(r.pr.recall) + "," + num(r.pr.f1) + "," +
           num(r.actual) + "\n";
  }
  return out;
}

}  // namespace speechyolo
