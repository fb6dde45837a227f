#include <gtest/gtest.h>

#include <cmath>

#include "speechyolo/error.hpp"
#include "speechyolo/metrics.hpp"
#include "test_util.hpp"

using namespace speechyolo;
using speechyolo::testing::Gen;

namespace {

DetectionRecord det(int k, double s, double e, double score, int cell = 0) {
  return {k, {s, e}, score, cell, 0};
}

std::vector<DetectionRecord> perfect(const std::vector<Event>& refs, double score = 0.9) {
  std::vector<DetectionRecord> out;
  for (const auto& r : refs) out.push_back(det(r.keyword, r.t_start, r.t_end, score));
  return out;
}

// Random utterance: references plus detections near, far from, or absent
// for them.
ScoredUtterance random_utterance(Gen& gen, int keywords) {
  ScoredUtterance u;
  const int n_refs = gen.integer(0, 4);
  double t = 0.0;
  for (int i = 0; i < n_refs; ++i) {
    const double s = t + gen.uniform(0.0, 0.2), e = s + gen.uniform(0.05, 0.2);
    if (e > 1.0) break;
    u.references.push_back({gen.integer(0, keywords - 1), s, e});
    t = e;
  }
  const int n_dets = gen.integer(0, 6);
  for (int i = 0; i < n_dets; ++i) {
    if (!u.references.empty() && gen.coin()) {
      const Event& r = u.references[gen.integer(0, static_cast<int>(u.references.size()) - 1)];
      const double shift = gen.uniform(-0.1, 0.1);
      u.detections.push_back(det(gen.coin() ? r.keyword : gen.integer(0, keywords - 1),
                                 r.t_start + shift, r.t_end + shift, gen.uniform(), i));
    } else {
      const double s = gen.uniform(0, 0.9);
      u.detections.push_back(det(gen.integer(0, keywords - 1), s, s + 0.1, gen.uniform(), i));
    }
  }
  return u;
}

}  // namespace

TEST(Match, Examples) {
  std::vector<Event> refs{{0, 0.1, 0.3}, {1, 0.5, 0.8}};
  auto m = match_detections(perfect(refs), refs);
  EXPECT_EQ(m.true_positives.size(), 2u);
  EXPECT_TRUE(m.false_positives.empty());
  EXPECT_TRUE(m.false_negatives.empty());

  std::vector<DetectionRecord> one{det(0, 0.1, 0.2, 0.5)};
  auto fp = match_detections(one, {});
  EXPECT_EQ(fp.false_positives.size(), 1u);
  EXPECT_TRUE(fp.true_positives.empty());

  // Two same-keyword detections over one reference: the higher score wins.
  std::vector<Event> single{{0, 0.2, 0.6}};
  std::vector<DetectionRecord> two{det(0, 0.25, 0.55, 0.4, 0), det(0, 0.3, 0.5, 0.8, 1)};
  auto m2 = match_detections(two, single);
  ASSERT_EQ(m2.true_positives.size(), 1u);
  EXPECT_EQ(m2.true_positives[0].first.score, 0.8);
  ASSERT_EQ(m2.false_positives.size(), 1u);
  EXPECT_EQ(m2.false_positives[0].score, 0.4);
}

TEST(Match, WrongKeywordOrOutsideSpanIsNotAHit) {
  std::vector<Event> refs{{0, 0.2, 0.4}};
  std::vector<DetectionRecord> wrong_kw{det(1, 0.2, 0.4, 0.9)};
  EXPECT_EQ(counts_of(match_detections(wrong_kw, refs)).tp, 0);
  std::vector<DetectionRecord> outside{det(0, 0.35, 0.65, 0.9)};  // midpoint 0.5
  EXPECT_EQ(counts_of(match_detections(outside, refs)).tp, 0);
  std::vector<DetectionRecord> on_edge{det(0, 0.1, 0.3, 0.9)};  // midpoint 0.2
  EXPECT_EQ(counts_of(match_detections(on_edge, refs)).tp, 1);
}

TEST(Match, BookkeepingIdentities) {
  Gen gen(1);
  for (int trial = 0; trial < 2000; ++trial) {
    ScoredUtterance u = random_utterance(gen, 3);
    const double theta = gen.uniform();
    auto kept = above_threshold(u.detections, theta);
    auto m = match_detections(kept, u.references);
    Counts c = counts_of(m);
    EXPECT_EQ(c.tp + c.fn, static_cast<long>(u.references.size()));
    EXPECT_EQ(c.tp + c.fp, static_cast<long>(kept.size()));
    for (const auto& [d, r] : m.true_positives) {
      EXPECT_EQ(d.keyword, r.keyword);
      EXPECT_GE(d.interval.midpoint(), r.t_start);
      EXPECT_LE(d.interval.midpoint(), r.t_end);
    }
    std::vector<ScoredUtterance> corpus{u};
    Counts pooled = pooled_counts(corpus, theta);
    EXPECT_EQ(pooled.tp, c.tp);
    EXPECT_EQ(pooled.fp, c.fp);
    EXPECT_EQ(pooled.fn, c.fn);
  }
}

TEST(Match, KeywordRelabelingInvariance) {
  Gen gen(2);
  const std::vector<int> perm{2, 0, 3, 1};
  for (int trial = 0; trial < 500; ++trial) {
    ScoredUtterance u = random_utterance(gen, 4);
    ScoredUtterance v = u;
    for (auto& d : v.detections) d.keyword = perm[d.keyword];
    for (auto& r : v.references) r.keyword = perm[r.keyword];
    auto a = precision_recall_f1(match_detections(u.detections, u.references));
    auto b = precision_recall_f1(match_detections(v.detections, v.references));
    EXPECT_EQ(a.f1, b.f1);
  }
}

TEST(PrecisionRecall, HarmonicMeanSpotChecks) {
  auto f1_of = [](double p, double r) { return 2 * p * r / (p + r); };
  EXPECT_NEAR(f1_of(0.836, 0.779), 0.8064941176, 1e-9);
  EXPECT_NEAR(f1_of(0.748, 0.761), 0.7544440027, 1e-9);
  // Reference triples are rounded to three decimals. At the rounded inputs the
  // harmonic mean lands just outside +-5e-4 of the rounded F1; the upper
  // corner of each rounding box lands inside.
  EXPECT_GT(std::abs(f1_of(0.836, 0.779) - 0.807), 5e-4);
  EXPECT_NEAR(f1_of(0.8365, 0.7795), 0.807, 5e-4);
  EXPECT_NEAR(f1_of(0.7485, 0.7615), 0.755, 5e-4);

  // The same values through counts: 836 hits of 1000 detections and 836 of
  // 1073 references gives p = 0.836, r = 0.779.
  auto pr = precision_recall_f1(Counts{836, 164, 237});
  EXPECT_NEAR(pr.precision, 0.836, 1e-9);
  EXPECT_NEAR(pr.recall, 0.779, 5e-4);
  EXPECT_NEAR(pr.f1, 0.807, 5e-4);
  auto pr2 = precision_recall_f1(Counts{748, 252, 235});
  EXPECT_NEAR(pr2.f1, 0.7544125063, 1e-9);

  auto all = precision_recall_f1(Counts{5, 0, 0});
  EXPECT_EQ(all.precision, 1.0);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.f1, 1.0);
  auto none = precision_recall_f1(Counts{0, 0, 0});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Sweep, PerfectDetectionStepFunction) {
  std::vector<Event> refs{{0, 0.2, 0.4}};
  std::vector<ScoredUtterance> corpus{{"u", perfect(refs, 0.9), refs}};
  auto thetas = default_theta_grid();
  ASSERT_EQ(thetas.size(), 19u);
  EXPECT_NEAR(thetas.front(), 0.05, 1e-12);
  EXPECT_NEAR(thetas.back(), 0.95, 1e-12);
  SweepResult r = sweep_threshold(corpus, thetas);
  EXPECT_EQ(r.best_theta, thetas.front());
  EXPECT_EQ(r.best.f1, 1.0);
  for (const auto& pt : r.curve) EXPECT_EQ(pt.pr.f1, pt.theta < 0.9 ? 1.0 : 0.0);
}

TEST(Sweep, SubsetPropertyAndDeterminism) {
  Gen gen(3);
  std::vector<ScoredUtterance> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(random_utterance(gen, 3));
  auto thetas = default_theta_grid();
  SweepResult a = sweep_threshold(corpus, thetas), b = sweep_threshold(corpus, thetas);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].pr.f1, b.curve[i].pr.f1);
    EXPECT_EQ(a.curve[i].pr.precision, b.curve[i].pr.precision);
  }
  for (const auto& u : corpus) {
    for (std::size_t i = 1; i < thetas.size(); ++i) {
      auto hi = above_threshold(u.detections, thetas[i]);
      auto lo = above_threshold(u.detections, thetas[i - 1]);
      for (const auto& d : hi) EXPECT_NE(std::find(lo.begin(), lo.end(), d), lo.end());
    }
  }
  double best = 0.0;
  for (const auto& pt : a.curve) best = std::max(best, pt.pr.f1);
  EXPECT_EQ(a.best.f1, best);
}

TEST(ActualAccuracy, Examples) {
  std::vector<Event> refs{{0, 0.2, 0.4}, {1, 0.6, 0.9}};
  EXPECT_EQ(actual_accuracy(perfect(refs), refs), 1.0);
  std::vector<DetectionRecord> off{det(0, 0.5, 0.7, 0.9)};
  EXPECT_EQ(actual_accuracy(off, refs), 0.0);
  std::vector<DetectionRecord> boundary{det(0, 0.1, 0.3, 0.9)};  // midpoint at start
  EXPECT_EQ(actual_accuracy(boundary, refs), 0.5);
  std::vector<DetectionRecord> end_edge{det(1, 0.8, 1.0, 0.9)};  // midpoint at end
  EXPECT_EQ(actual_accuracy(end_edge, refs), 0.5);
  EXPECT_EQ(actual_accuracy(off, {}), 0.0);
  // One detection serves one reference only.
  std::vector<Event> twins{{0, 0.2, 0.4}, {0, 0.2, 0.4}};
  std::vector<DetectionRecord> single{det(0, 0.25, 0.35, 0.9)};
  EXPECT_EQ(actual_accuracy(single, twins), 0.5);
}

TEST(MeanIou, Examples) {
  std::vector<Event> refs{{0, 0.2, 0.4}, {1, 0.5, 0.7}};
  std::vector<ScoredUtterance> corpus{{"u", perfect(refs), refs}};
  EXPECT_EQ(*mean_iou(corpus, 0.5, IouMode::kMatchedOnly), 1.0);
  EXPECT_EQ(*mean_iou(corpus, 0.5, IouMode::kOracleAssignment), 1.0);

  // IOU 0.5 and 1.0 -> 0.75.
  std::vector<ScoredUtterance> mixed{
      {"u", {det(0, 0.2, 0.4, 0.9), det(1, 0.5, 0.6, 0.9)}, refs}};
  EXPECT_NEAR(*mean_iou(mixed, 0.5, IouMode::kMatchedOnly), 0.75, 1e-12);
  EXPECT_FALSE(mean_iou(corpus, 0.95, IouMode::kMatchedOnly).has_value());
  // Oracle mode ignores the threshold.
  EXPECT_NEAR(*mean_iou(mixed, 0.95, IouMode::kOracleAssignment), 0.75, 1e-12);
  std::vector<ScoredUtterance> empty{{"u", {}, {}}};
  EXPECT_FALSE(mean_iou(empty, 0.0, IouMode::kOracleAssignment).has_value());
}

TEST(MeanIou, AddingAPairAtTheMeanKeepsIt) {
  std::vector<Event> refs{{0, 0.0, 0.2}, {0, 0.5, 0.7}};
  // IOUs 0.5 and 1.0.
  std::vector<ScoredUtterance> corpus{{"a", {det(0, 0.0, 0.1, 0.9), det(0, 0.5, 0.7, 0.9)}, refs}};
  const double m = *mean_iou(corpus, 0.0, IouMode::kMatchedOnly);
  // A pair with IOU 0.75: reference [0, 0.4], detection [0, 0.3].
  corpus.push_back({"b", {det(0, 0.0, 0.3, 0.9)}, {{0, 0.0, 0.4}}});
  EXPECT_NEAR(*mean_iou(corpus, 0.0, IouMode::kMatchedOnly), m, 1e-12);
}

TEST(Twv, HandCase) {
  std::map<int, KeywordCounts> counts{{0, {2, 1, 1}}};
  TwvConfig cfg = TwvConfig::nist(10000.0);
  EXPECT_DOUBLE_EQ(cfg.beta, 999.9);
  const double expected = 1.0 - (0.5 + 999.9 * 1.0 / 9998.0);
  EXPECT_NEAR(*twv_from_counts(counts, cfg), expected, 1e-12);
  EXPECT_NEAR(*twv_from_counts(counts, cfg), 0.400, 5e-4);

  // Same case through the detection-level path.
  std::vector<Event> refs{{0, 0.1, 0.2}, {0, 0.5, 0.6}};
  std::vector<ScoredUtterance> corpus{
      {"u", {det(0, 0.1, 0.2, 0.9), det(0, 0.8, 0.9, 0.9)}, refs}};
  EXPECT_NEAR(*atwv(corpus, 0.5, cfg), expected, 1e-12);
}

TEST(Twv, BoundaryCases) {
  std::vector<Event> refs{{0, 0.1, 0.3}, {1, 0.5, 0.7}};
  std::vector<ScoredUtterance> perfect_corpus{{"u", perfect(refs), refs}};
  std::vector<ScoredUtterance> silent{{"u", {}, refs}};
  TwvConfig cfg = TwvConfig::nist(100.0);
  EXPECT_EQ(*atwv(perfect_corpus, 0.5, cfg), 1.0);
  EXPECT_EQ(*atwv(silent, 0.5, cfg), 0.0);
  std::vector<ScoredUtterance> no_refs{{"u", {det(0, 0.1, 0.2, 0.9)}, {}}};
  EXPECT_FALSE(atwv(no_refs, 0.5, cfg).has_value());

  auto thetas = default_theta_grid();
  auto best = mtwv(perfect_corpus, thetas, cfg);
  ASSERT_TRUE(best.has_value());
  EXPECT_EQ(best->value, 1.0);
  EXPECT_EQ(best->best_theta, thetas.front());
  EXPECT_EQ(mtwv(silent, thetas, cfg)->value, 0.0);
}

TEST(Twv, KeywordsWithoutReferencesExcluded) {
  // Keyword 1 only has a false alarm; it does not enter the mean.
  std::vector<Event> refs{{0, 0.1, 0.3}};
  std::vector<ScoredUtterance> corpus{{"u", {det(0, 0.1, 0.3, 0.9), det(1, 0.6, 0.7, 0.9)}, refs}};
  EXPECT_EQ(*atwv(corpus, 0.5, TwvConfig::nist(100.0)), 1.0);
}

TEST(Twv, MonotoneInCountsAndMtwvDominates) {
  TwvConfig cfg = TwvConfig::nist(500.0);
  Gen gen(4);
  for (int trial = 0; trial < 500; ++trial) {
    KeywordCounts c{gen.integer(1, 20), 0, gen.integer(0, 10)};
    c.tp = gen.integer(0, static_cast<int>(c.n_true) - 1);
    std::map<int, KeywordCounts> base{{0, c}};
    auto more_fp = base, more_tp = base;
    more_fp[0].fp += 1;
    more_tp[0].tp += 1;
    EXPECT_LT(*twv_from_counts(more_fp, cfg), *twv_from_counts(base, cfg));
    EXPECT_GT(*twv_from_counts(more_tp, cfg), *twv_from_counts(base, cfg));
  }
  std::vector<ScoredUtterance> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(random_utterance(gen, 3));
  auto thetas = default_theta_grid();
  auto best = mtwv(corpus, thetas, cfg);
  ASSERT_TRUE(best.has_value());
  for (double t : thetas) EXPECT_GE(best->value, *atwv(corpus, t, cfg));
}

TEST(Twv, ConfigValidation) {
  TwvConfig c = TwvConfig::nist(10.0);
  EXPECT_NO_THROW(c.validate());
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TwvConfig::nist(0.0);
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TwvConfig::nist(10.0);
  c.p_target = 1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
}
