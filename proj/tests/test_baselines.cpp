#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "evicore/baselines.hpp"
#include "evicore/losses.hpp"
#include "evicore/synthgen.hpp"

using namespace evicore;
using namespace evicore::baselines;

namespace {

nn::BackboneConfig small_cfg(double dropout) {
  nn::BackboneConfig c;
  c.input_rows = c.input_cols = 8;
  c.width = 3;
  c.dropout_rate = dropout;
  return c;
}

nn::Tensor batch(int n, std::uint64_t seed) {
  nn::Tensor x(n, 1, 8, 8);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (auto& v : x.values()) v = z(rng);
  return x;
}

}  // namespace

TEST(Confidence, EntropyExtremes) {
  EXPECT_NEAR(entropy_confidence(0.5), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(entropy_confidence(0.0), 1.0);
  EXPECT_DOUBLE_EQ(entropy_confidence(1.0), 1.0);
  EXPECT_NEAR(entropy_confidence(0.2), entropy_confidence(0.8), 1e-15);
  EXPECT_EQ(prob_output(0.5).predicted_label, Label::benign);
  EXPECT_EQ(prob_output(0.51).predicted_label, Label::cancer);
}

TEST(McDropout, RequiresDropoutAndIsSeeded) {
  nn::Backbone plain(small_cfg(0.0), 1);
  EXPECT_THROW(mc_dropout_predict(plain, batch(2, 1), 5, 1), std::invalid_argument);
  nn::Backbone m(small_cfg(0.5), 1);
  EXPECT_THROW(mc_dropout_predict(m, batch(2, 1), 0, 1), std::invalid_argument);
  const auto x = batch(6, 2);
  const auto a = mc_dropout_predict(m, x, 5, 11), b = mc_dropout_predict(m, x, 5, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].prob_cancer, b[i].prob_cancer);
    EXPECT_GE(a[i].confidence, 0.0);
    EXPECT_LE(a[i].confidence, 1.0);
    EXPECT_NEAR(a[i].confidence, entropy_confidence(a[i].prob_cancer), 1e-12);
  }
}

TEST(McDropout, MorePassesLowerVariance) {
  auto cfg = small_cfg(0.5);
  nn::Backbone m(cfg, 3);
  // scale the classifier so dropout noise is visible in the probabilities
  auto params = m.parameters();
  for (auto& v : params[params.size() - 2].value->values()) v *= 8.0;
  const auto x = batch(1, 4);
  auto spread = [&](int passes) {
    std::vector<double> p;
    for (int rep = 0; rep < 20; ++rep) p.push_back(mc_dropout_predict(m, x, passes, 100 + rep)[0].prob_cancer);
    double mean = 0;
    for (double v : p) mean += v / p.size();
    double var = 0;
    for (double v : p) var += (v - mean) * (v - mean) / (p.size() - 1);
    return var;
  };
  EXPECT_LT(spread(40), spread(2));
}

TEST(Ensemble, MeanAndPermutationInvariance) {
  std::vector<nn::Backbone> models;
  for (int i = 0; i < 3; ++i) models.emplace_back(small_cfg(0.0), 10 + i);
  const auto x = batch(4, 5);
  const auto out = ensemble_predict(models, x);
  std::vector<double> mean(4, 0.0);
  for (auto& m : models) {
    const auto logits = m.forward(x, nn::Mode::eval);
    for (int i = 0; i < 4; ++i) mean[i] += softmax_cancer_probability(logits[2 * i], logits[2 * i + 1]) / 3.0;
  }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out[i].prob_cancer, mean[i], 1e-12);

  std::vector<nn::Backbone> shuffled{models[2], models[0], models[1]};
  const auto again = ensemble_predict(shuffled, x);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(again[i].prob_cancer, out[i].prob_cancer, 1e-15);

  std::vector<nn::Backbone> one{models[0]};
  SoftmaxPredictor single(models[0]);
  const auto a = ensemble_predict(one, x), b = single.predict(x);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(a[i].prob_cancer, b[i].prob_cancer);

  std::vector<nn::Backbone> none;
  EXPECT_THROW(ensemble_predict(none, x), std::invalid_argument);
}

TEST(TrainBaseline, EnsembleMembersDifferAndRepeat) {
  synth::SynthConfig data;
  data.n_patients = 6;
  data.cores_per_patient = 4;
  data.patches_per_core = 6;
  data.height = data.width = 8;
  data.involvement = synth::InvolvementDistribution::fixed(1.0);
  const auto ds = synth::generate_dataset(data);
  const std::vector<BiopsyCore> tr(ds.cores.begin(), ds.cores.begin() + 16);
  const std::vector<BiopsyCore> va(ds.cores.begin() + 16, ds.cores.end());

  BaselineConfig cfg;
  cfg.kind = BaselineKind::ensemble;
  cfg.ensemble_size = 5;
  cfg.training.max_epochs = 1;
  cfg.training.co_teaching = false;
  cfg.training.backbone = small_cfg(0.0);
  auto a = train_baseline(tr, va, cfg, 4);
  auto b = train_baseline(tr, va, cfg, 4);
  ASSERT_EQ(a.size(), 5u);
  const auto x = batch(2, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].forward(x, nn::Mode::eval).values(), b[i].forward(x, nn::Mode::eval).values());
    for (std::size_t j = 0; j < i; ++j)
      EXPECT_NE(a[i].forward(x, nn::Mode::eval).values(), a[j].forward(x, nn::Mode::eval).values());
  }
  cfg.kind = BaselineKind::mc_dropout;
  EXPECT_THROW(train_baseline(tr, va, cfg, 4), std::invalid_argument);
  EXPECT_EQ(baseline_kind_from_string(to_string(BaselineKind::mc_dropout)), BaselineKind::mc_dropout);
}
