#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "evicore/nn/backbone.hpp"
#include "evicore/nn/checkpoint.hpp"
#include "evicore/nn/optimizer.hpp"

using namespace evicore::nn;

namespace {

Tensor random_batch(int n, int rows, int cols, std::uint64_t seed) {
  Tensor x(n, 1, rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (auto& v : x.values()) v = z(rng);
  return x;
}

BackboneConfig tiny(BackboneKind kind) {
  BackboneConfig c;
  c.kind = kind;
  c.input_rows = c.input_cols = 8;
  c.width = 3;
  return c;
}

// sum of logits weighted by fixed coefficients
double weighted(const Tensor& logits, const std::vector<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += logits[i] * w[i];
  return s;
}

void check_gradients(BackboneKind kind) {
  Backbone model(tiny(kind), 3);
  const Tensor x = random_batch(3, 8, 8, 4);
  std::vector<double> w(6);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (auto& v : w) v = z(rng);

  Tensor g(3, 2, 1, 1);
  g.values() = w;
  model.zero_grad();
  model.forward(x, Mode::train);
  model.backward(g);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (auto& p : model.parameters()) {
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t k = static_cast<std::size_t>(u(rng) * p.value->size());
      const double orig = (*p.value)[k];
      const double h = 1e-5;
      (*p.value)[k] = orig + h;
      const double up = weighted(model.forward(x, Mode::train), w);
      (*p.value)[k] = orig - h;
      const double down = weighted(model.forward(x, Mode::train), w);
      (*p.value)[k] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = (*p.grad)[k];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-4});
      EXPECT_LT(std::abs(fd - an) / scale, 1e-3) << p.name << '[' << k << "] fd=" << fd << " an=" << an;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

}  // namespace

TEST(Backbone, SmallCnnGradients) { check_gradients(BackboneKind::small_cnn); }
TEST(Backbone, HalfResnetGradients) { check_gradients(BackboneKind::half_resnet18); }

TEST(Backbone, ShapesAndBlocks) {
  Backbone cnn(BackboneConfig{}, 1);
  EXPECT_EQ(cnn.forward(random_batch(5, 32, 32, 1), Mode::eval).shape(), (std::array<int, 4>{5, 2, 1, 1}));
  EXPECT_EQ(cnn.forward(Tensor(0, 1, 32, 32), Mode::eval).n(), 0);
  EXPECT_THROW(cnn.forward(random_batch(1, 16, 16, 1), Mode::eval), std::invalid_argument);
  EXPECT_EQ(cnn.residual_block_count(), 0);

  auto cfg = tiny(BackboneKind::half_resnet18);
  cfg.width = 0;
  Backbone res(cfg, 1);
  EXPECT_EQ(res.residual_block_count(), 4);
  EXPECT_EQ(to_string(backbone_kind_from_string("half_resnet18")), "half_resnet18");
  EXPECT_THROW(backbone_kind_from_string("vgg"), std::invalid_argument);
}

TEST(Backbone, DeterministicInitAndIndependentClones) {
  const auto cfg = tiny(BackboneKind::small_cnn);
  Backbone a(cfg, 9), b(cfg, 9);
  const Tensor x = random_batch(2, 8, 8, 2);
  EXPECT_EQ(a.forward(x, Mode::eval).values(), b.forward(x, Mode::eval).values());

  Backbone c = clone_with_new_init(cfg, 10);
  EXPECT_EQ(a.fingerprint(), c.fingerprint());
  EXPECT_NE(a.forward(x, Mode::eval).values(), c.forward(x, Mode::eval).values());

  Backbone copy = a;
  (*copy.parameters().front().value)[0] += 1.0;
  EXPECT_NE((*copy.parameters().front().value)[0], (*a.parameters().front().value)[0]);
}

TEST(Backbone, ModesDifferOnlyWhereExpected) {
  auto cfg = tiny(BackboneKind::half_resnet18);
  cfg.dropout_rate = 0.5;
  Backbone m(cfg, 2);
  const Tensor x = random_batch(4, 8, 8, 3);
  EXPECT_EQ(m.forward(x, Mode::eval).values(), m.forward(x, Mode::eval).values());
  m.reseed_dropout(1);
  const auto a = m.forward(x, Mode::mc_dropout);
  m.reseed_dropout(1);
  EXPECT_EQ(a.values(), m.forward(x, Mode::mc_dropout).values());
  EXPECT_NE(a.values(), m.forward(x, Mode::mc_dropout).values());
}

TEST(Optimizer, ReducesQuadratic) {
  for (auto kind : {OptimizerKind::novograd, OptimizerKind::adamw}) {
    Tensor w(1, 4, 1, 1, 3.0), g(1, 4, 1, 1);
    std::vector<ParamRef> params{{"w", &w, &g}};
    auto opt = make_optimizer({kind, 0.05, 0.0, 1e-8});
    for (int it = 0; it < 400; ++it) {
      for (std::size_t i = 0; i < w.size(); ++i) g[i] = 2 * w[i];
      opt->step(params);
    }
    for (double v : w.values()) EXPECT_LT(std::abs(v), 0.3) << to_string(kind);
  }
  EXPECT_THROW(optimizer_kind_from_string("sgd"), std::invalid_argument);
}

TEST(Checkpoint, RoundTrip) {
  auto cfg = tiny(BackboneKind::half_resnet18);
  cfg.dropout_rate = 0.25;
  Backbone m(cfg, 4);
  const Tensor x = random_batch(3, 8, 8, 5);
  m.forward(x, Mode::train);  // move the running statistics away from their defaults
  const auto path = std::filesystem::temp_directory_path() / "evicore_ckpt_test.ckpt";
  save_checkpoint(path, m, {{"method", "edl"}});
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.metadata.at("method"), "edl");
  EXPECT_EQ(loaded.model.config(), cfg);
  const auto a = m.forward(x, Mode::eval), b = loaded.model.forward(x, Mode::eval);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}
