#include <gtest/gtest.h>

#include <random>

#include "evicore/eval.hpp"

using namespace evicore;
using namespace evicore::eval;

namespace {

PatchPrediction patch(double prob, double conf, const std::string& core = "c", Label weak = Label::benign) {
  PatchPrediction p;
  p.prob_cancer = prob;
  p.confidence = conf;
  p.predicted_label = prob > 0.5 ? Label::cancer : Label::benign;
  p.core_id = core;
  p.weak_label = weak;
  return p;
}

CoreOutcome scored(double s, Label y) {
  CoreOutcome c;
  c.prediction.status = CoreStatus::predicted;
  c.prediction.score = s;
  c.label = y;
  return c;
}

}  // namespace

TEST(Ece, HandBinnedFixture) {
  const std::vector<ScoredOutcome> v{{0.95, true}, {0.95, false}, {0.65, true}, {0.65, true}};
  const auto r = ece(v);
  EXPECT_NEAR(r.ece, 0.4, 1e-12);
  EXPECT_EQ(r.bins[9].count, 2u);
  EXPECT_EQ(r.bins[6].count, 2u);
  EXPECT_EQ(r.total, 4u);
}

TEST(Ece, PerfectAndEdges) {
  std::vector<ScoredOutcome> v(10, {1.0, true});
  EXPECT_DOUBLE_EQ(ece(v).ece, 0.0);
  // 0 goes to the first bin, 0.1 as well (right-closed), 0.3 to the third
  const auto r = ece(std::vector<ScoredOutcome>{{0.0, false}, {0.1, false}, {0.3, false}});
  EXPECT_EQ(r.bins[0].count, 2u);
  EXPECT_EQ(r.bins[2].count, 1u);
  EXPECT_THROW(ece(std::vector<ScoredOutcome>{}), std::invalid_argument);
  EXPECT_THROW(ece(std::vector<ScoredOutcome>{{1.2, true}}), std::invalid_argument);
}

TEST(Ece, CalibratedPredictionsHaveSmallError) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredOutcome> v;
  for (int i = 0; i < 10000; ++i) {
    const double c = u(rng);
    v.push_back({c, u(rng) < c});
  }
  const double e = ece(v).ece;
  EXPECT_LT(e, 0.02);
  EXPECT_GE(e, 0.0);
}

TEST(Aggregate, Examples) {
  std::vector<PatchPrediction> all_sure(10, patch(1.0, 1.0));
  auto c = aggregate_core(all_sure, 0.9);
  EXPECT_EQ(c.status, CoreStatus::predicted);
  EXPECT_DOUBLE_EQ(*c.score, 1.0);

  std::vector<PatchPrediction> half;
  for (int i = 0; i < 10; ++i) half.push_back(patch(0.8, i < 5 ? 0.5 : 0.95));
  c = aggregate_core(half, 0.7);
  EXPECT_EQ(c.status, CoreStatus::uncertain);
  EXPECT_DOUBLE_EQ(c.retained_fraction, 0.5);
  EXPECT_FALSE(c.score.has_value());

  std::vector<PatchPrediction> mixed;
  for (int i = 0; i < 4; ++i) mixed.push_back(patch(0.0, 0.1));
  mixed.push_back(patch(0.2, 0.9));
  for (int i = 0; i < 5; ++i) mixed.push_back(patch(0.9, 0.9));
  c = aggregate_core(mixed, 0.5);
  EXPECT_EQ(c.status, CoreStatus::predicted);
  EXPECT_NEAR(*c.score, 4.7 / 6.0, 1e-12);
  EXPECT_NEAR(*c.score, 0.7833, 5e-5);
  EXPECT_GT(*c.score, 0.5);
}

TEST(Aggregate, SixtyPercentRetainedIsPredicted) {
  std::vector<PatchPrediction> v;
  for (int i = 0; i < 10; ++i) v.push_back(patch(0.7, i < 4 ? 0.2 : 0.8));
  EXPECT_EQ(aggregate_core(v, 0.5).status, CoreStatus::predicted);
  EXPECT_EQ(aggregate_core(v, 0.0).status, CoreStatus::predicted);
  EXPECT_THROW(aggregate_core(std::vector<PatchPrediction>{}, 0.5), std::invalid_argument);
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.6, 0.7}, {true, true, false, false}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.9, 0.4, 0.6, 0.1}, {true, true, false, false}), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.5, 0.5}, {true, false}), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.5, 0.6}, {true, true}), std::invalid_argument);
}

TEST(Auc, MatchesPairCountAndIsRankInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> q(1, 8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s, s2;
    std::vector<bool> y;
    for (int i = 0; i < 30; ++i) {
      s.push_back(q(rng) / 8.0);
      s2.push_back(s.back() * s.back());
      y.push_back(i % 3 == 0);
    }
    double good = 0, pairs = 0;
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j)
        if (y[i] && !y[j]) {
          pairs += 1;
          good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    EXPECT_NEAR(roc_auc(s, y), good / pairs, 1e-12);
    EXPECT_DOUBLE_EQ(roc_auc(s, y), roc_auc(s2, y));
  }
}

TEST(CoreMetrics, Examples) {
  std::vector<CoreOutcome> v{scored(1, Label::cancer), scored(0, Label::benign)};
  auto m = core_metrics(v);
  EXPECT_DOUBLE_EQ(m.auc, 1.0);
  EXPECT_DOUBLE_EQ(m.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(m.specificity, 1.0);

  v = {scored(0.9, Label::cancer), scored(0.4, Label::cancer), scored(0.6, Label::benign),
       scored(0.1, Label::benign)};
  CoreOutcome unsure;
  unsure.label = Label::cancer;
  v.push_back(unsure);
  m = core_metrics(v);
  EXPECT_DOUBLE_EQ(m.auc, 0.75);
  EXPECT_DOUBLE_EQ(m.sensitivity, 0.5);
  EXPECT_DOUBLE_EQ(m.specificity, 0.5);
  EXPECT_EQ(m.uncertain, 1u);
  EXPECT_EQ(m.predicted, 4u);
  EXPECT_THROW(core_metrics(std::vector<CoreOutcome>{scored(0.2, Label::benign)}), std::invalid_argument);
}

TEST(PatchBalancedAccuracy, Definition) {
  std::vector<PatchPrediction> v;
  for (int i = 0; i < 4; ++i) v.push_back(patch(0.1, 1, "a", Label::benign));
  v.push_back(patch(0.9, 1, "b", Label::cancer));
  v.push_back(patch(0.1, 1, "b", Label::cancer));
  EXPECT_DOUBLE_EQ(patch_balanced_accuracy(v, LabelSource::weak), 0.75);
  EXPECT_THROW(patch_balanced_accuracy(v, LabelSource::truth), std::invalid_argument);
  for (auto& p : v) p.true_label = p.predicted_label;
  EXPECT_DOUBLE_EQ(patch_balanced_accuracy(v, LabelSource::truth), 1.0);
}

TEST(PatchBalancedAccuracy, RandomPredictionsNearHalf) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.5);
  std::vector<PatchPrediction> v;
  for (int i = 0; i < 10000; ++i) v.push_back(patch(coin(rng) ? 0.9 : 0.1, 1, "x", label_from_int(i % 2)));
  EXPECT_NEAR(patch_balanced_accuracy(v, LabelSource::weak), 0.5, 0.02);
}

TEST(Curve, RetentionIsMonotoneAndEndsEmpty) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<PatchPrediction> v;
    for (int c = 0; c < 12; ++c)
      for (int k = 0; k < 10; ++k)
        v.push_back(patch(u(rng), u(rng) * 0.999, "c" + std::to_string(c), label_from_int(c % 2)));
    const auto curve = accuracy_vs_confidence_curve(v, grid);
    EXPECT_EQ(curve.front().retained_cores, 12u);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].retained_cores, curve[i - 1].retained_cores);
    EXPECT_EQ(curve.back().retained_cores, 0u);
    EXPECT_FALSE(curve.back().balanced_accuracy.has_value());
  }
}

TEST(Aggregate, ZeroConfidenceDummiesOnlyShiftRetention) {
  // appending always-rejected patches leaves the retained mean alone and only lowers the
  // retained fraction
  std::vector<PatchPrediction> v;
  for (int i = 0; i < 6; ++i) v.push_back(patch(0.3 + 0.1 * i, 0.8));
  const auto before = aggregate_core(v, 0.5);
  auto padded = v;
  for (int i = 0; i < 3; ++i) padded.push_back(patch(0.99, 0.0));
  const auto after = aggregate_core(padded, 0.5);
  EXPECT_EQ(after.status, CoreStatus::predicted);
  EXPECT_DOUBLE_EQ(*after.score, *before.score);
  EXPECT_NEAR(after.retained_fraction, 6.0 / 9.0, 1e-12);
  padded.push_back(patch(0.99, 0.0));
  EXPECT_EQ(aggregate_core(padded, 0.5).status, CoreStatus::predicted);  // exactly 60 %
  padded.push_back(patch(0.99, 0.0));
  EXPECT_EQ(aggregate_core(padded, 0.5).status, CoreStatus::uncertain);
}

TEST(Ood, SummaryNeedsBothGroups) {
  std::vector<PatchPrediction> v{patch(0.5, 0.2), patch(0.1, 0.9), patch(0.1, 0.8)};
  EXPECT_FALSE(ood_summary(v).has_value());
  v[0].is_ood = true;
  v[1].is_ood = false;
  v[2].is_ood = false;
  const auto s = ood_summary(v);
  ASSERT_TRUE(s.has_value());
  EXPECT_DOUBLE_EQ(s->auroc, 1.0);
  EXPECT_NEAR(s->mean_uncertainty_ood, 0.8, 1e-12);
  EXPECT_NEAR(s->mean_uncertainty_id, 0.15, 1e-12);
}
