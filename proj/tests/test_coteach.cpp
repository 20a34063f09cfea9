#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "evicore/coteach.hpp"
#include "evicore/eval.hpp"
#include "evicore/predict.hpp"
#include "evicore/synthgen.hpp"
#include "oracles.hpp"

using namespace evicore;
using namespace evicore::coteach;

namespace {

synth::SynthConfig tiny_data(double involvement, double separation) {
  synth::SynthConfig c;
  c.n_patients = 10;
  c.cores_per_patient = 4;
  c.patches_per_core = 10;
  c.height = c.width = 16;
  c.involvement = synth::InvolvementDistribution::fixed(involvement);
  c.class_separation = separation;
  c.seed = 5;
  return c;
}

CoteachConfig tiny_training(int epochs) {
  CoteachConfig c;
  c.max_epochs = epochs;
  c.batch_size = 32;
  c.optimizer.kind = nn::OptimizerKind::adamw;
  c.optimizer.learning_rate = 2e-3;
  c.backbone.input_rows = c.backbone.input_cols = 16;
  c.backbone.width = 4;
  return c;
}

Batch batch_of(const std::vector<BiopsyCore>& cores, std::size_t count) {
  std::vector<const Image*> px;
  Batch b;
  for (const auto& c : cores)
    for (const auto& p : c.patches()) {
      if (px.size() == count) break;
      px.push_back(&p.pixels);
      b.labels.push_back(p.weak_label);
    }
  b.x = batch_from_images(px);
  return b;
}

}  // namespace

TEST(SelectionRatio, Examples) {
  EXPECT_DOUBLE_EQ(selection_ratio(0, 100, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(selection_ratio(40, 100, 0.4), 0.6);
  EXPECT_DOUBLE_EQ(selection_ratio(100, 100, 0.4), 0.6);
  EXPECT_DOUBLE_EQ(selection_ratio(10, 100, 0.4), 0.9);
  EXPECT_THROW(selection_ratio(0, 0, 0.4), std::invalid_argument);
  EXPECT_THROW(selection_ratio(0, 10, 1.4), std::invalid_argument);
  double prev = 1.0;
  for (int e = 0; e <= 30; ++e) {
    const double r = selection_ratio(e, 30, 0.4);
    EXPECT_LE(r, prev);
    EXPECT_GE(r, 0.6);
    prev = r;
  }
}

TEST(SmallLoss, Examples) {
  EXPECT_EQ(select_small_loss(std::vector<double>{0.9, 0.1, 0.5, 0.2}, 0.5), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(select_small_loss(std::vector<double>{1, 1, 1, 1}, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_small_loss(std::vector<double>{3, 2, 1}, 1.0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_small_loss(std::vector<double>{3, 2, 1}, 0.1), (std::vector<std::size_t>{2}));
  EXPECT_THROW(select_small_loss(std::vector<double>{}, 0.5), std::invalid_argument);
  EXPECT_THROW(select_small_loss(std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST(SmallLoss, MatchesSortOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(1, 40), level(0, 6);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> losses(len(rng));
    for (auto& l : losses) l = level(rng) * 0.25;  // coarse levels force ties
    const double r = u(rng);
    EXPECT_EQ(select_small_loss(losses, r), oracle::small_loss_by_sort(losses, r));
  }
}

TEST(Step, FullRatioAndSymmetricPeers) {
  const auto ds = synth::generate_dataset(tiny_data(0.7, 1.0));
  const auto cfg = tiny_training(10);
  auto state = init_state(cfg, 1);
  ASSERT_TRUE(state.b.has_value());
  state.b.emplace(Peer{state.a.model, nn::make_optimizer(cfg.optimizer)});
  const auto batch = batch_of(ds.cores, 40);

  auto r = coteach_step(state, batch, 0, cfg);
  EXPECT_EQ(r.selected_by_a.size(), 40u);
  EXPECT_EQ(r.selected_by_b.size(), 40u);
  r = coteach_step(state, batch, 4, cfg);
  EXPECT_EQ(r.selected_by_a.size(), 24u);
  EXPECT_EQ(r.selected_by_a, r.selected_by_b);
  EXPECT_DOUBLE_EQ(r.mean_loss_a, r.mean_loss_b);
  const nn::Tensor probe = batch_of(ds.cores, 8).x;
  EXPECT_EQ(state.a.model.forward(probe, nn::Mode::eval).values(),
            state.b->model.forward(probe, nn::Mode::eval).values());
}

TEST(Step, SinglePeerUsesWholeBatch) {
  const auto ds = synth::generate_dataset(tiny_data(0.7, 1.0));
  auto cfg = tiny_training(10);
  cfg.co_teaching = false;
  auto state = init_state(cfg, 1);
  EXPECT_FALSE(state.b.has_value());
  const auto r = coteach_step(state, batch_of(ds.cores, 20), 8, cfg);
  EXPECT_EQ(r.selected_by_a.size(), 20u);
  EXPECT_THROW(coteach_step(state, Batch{nn::Tensor(0, 1, 16, 16), {}}, 0, cfg), std::invalid_argument);
}

TEST(Train, ZeroEpochsAndEmptySplits) {
  const auto ds = synth::generate_dataset(tiny_data(1.0, 1.0));
  const std::vector<BiopsyCore> tr(ds.cores.begin(), ds.cores.begin() + 20);
  const std::vector<BiopsyCore> va(ds.cores.begin() + 20, ds.cores.end());
  const auto res = train(tr, va, tiny_training(0), 3);
  EXPECT_TRUE(res.state.history.empty());
  EXPECT_EQ(res.best_epoch, -1);
  EXPECT_EQ(res.best.fingerprint(), res.state.a.model.fingerprint());
  EXPECT_THROW(train({}, va, tiny_training(1), 3), std::invalid_argument);
  EXPECT_THROW(train(tr, {}, tiny_training(1), 3), std::invalid_argument);
}

TEST(Train, DeterministicHistory) {
  const auto ds = synth::generate_dataset(tiny_data(0.7, 1.0));
  const std::vector<BiopsyCore> tr(ds.cores.begin(), ds.cores.begin() + 24);
  const std::vector<BiopsyCore> va(ds.cores.begin() + 24, ds.cores.end());
  const auto a = train(tr, va, tiny_training(2), 7);
  const auto b = train(tr, va, tiny_training(2), 7);
  ASSERT_EQ(a.state.history.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.state.history[i].train_loss_a, b.state.history[i].train_loss_a);
    EXPECT_EQ(a.state.history[i].train_loss_b, b.state.history[i].train_loss_b);
    EXPECT_EQ(a.state.history[i].val_patch_bacc_a, b.state.history[i].val_patch_bacc_a);
  }
  EXPECT_DOUBLE_EQ(a.state.history[1].ratio, selection_ratio(1, 2, 0.4));
}

TEST(Train, LearnsSeparableCleanData) {
  auto data = tiny_data(1.0, 2.0);
  const auto ds = synth::generate_dataset(data);
  const std::vector<BiopsyCore> tr(ds.cores.begin(), ds.cores.begin() + 28);
  const std::vector<BiopsyCore> va(ds.cores.begin() + 28, ds.cores.end());
  auto cfg = tiny_training(20);
  cfg.co_teaching = false;
  auto res = train(tr, va, cfg, 1);
  EvidentialPredictor pred(res.best);
  const auto p = predict_cores(pred, va, &ds.oracle);
  std::size_t hit = 0;
  for (const auto& x : p) hit += x.predicted_label == *x.true_label;
  EXPECT_GT(static_cast<double>(hit) / p.size(), 0.95);
}

TEST(Step, SelectionIsCleanerThanBatchAfterWarmup) {
  const auto ds = synth::generate_dataset(tiny_data(0.7, 2.0));
  auto cfg = tiny_training(10);
  auto state = init_state(cfg, 2);

  Batch all;
  std::vector<const Image*> px;
  std::vector<bool> clean;
  for (const auto& c : ds.cores) {
    const auto& truth = ds.oracle.core(c.core_id());
    for (std::size_t k = 0; k < c.size(); ++k) {
      px.push_back(&c.patches()[k].pixels);
      all.labels.push_back(c.weak_label());
      clean.push_back(truth[k].true_label == c.weak_label());
    }
  }
  all.x = batch_from_images(px);

  // full-batch warmup at ratio 1
  std::mt19937_64 rng(9);
  std::vector<std::size_t> order(px.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < 20; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + 32 <= order.size(); start += 32) {
      std::vector<const Image*> imgs;
      Batch b;
      for (std::size_t i = start; i < start + 32; ++i) {
        imgs.push_back(px[order[i]]);
        b.labels.push_back(all.labels[order[i]]);
      }
      b.x = batch_from_images(imgs);
      coteach_step(state, b, 0, cfg);
    }
  }

  const auto report = coteach_step(state, all, cfg.max_epochs, cfg);
  double selected_clean = 0, all_clean = 0;
  for (auto i : report.selected_by_a) selected_clean += clean[i];
  for (bool c : clean) all_clean += c;
  EXPECT_GT(selected_clean / report.selected_by_a.size(), all_clean / clean.size() + 0.05);
}
