#include "evicore/coteach.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evicore/eval.hpp"
#include "evicore/predict.hpp"
#include "evicore/texture.hpp"

namespace evicore::coteach {

double selection_ratio(int epoch, int max_epochs, double gamma) {
  if (max_epochs < 1) throw std::invalid_argument("selection_ratio: e_max must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("selection_ratio: gamma must lie in [0, 1]");
  if (epoch < 0) throw std::invalid_argument("selection_ratio: negative epoch");
  return 1.0 - std::min(static_cast<double>(epoch) / max_epochs, gamma);
}

std::vector<std::size_t> select_small_loss(std::span<const double> losses, double ratio) {
  if (losses.empty()) throw std::invalid_argument("select_small_loss: empty loss vector");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("select_small_loss: ratio must lie in (0, 1]");
  const std::size_t n = losses.size();
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio * n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) { return losses[a] < losses[b] || (losses[a] == losses[b] && a < b); };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), less);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void CoteachConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  edl.validate();
  backbone.validate();
}

TrainState init_state(const CoteachConfig& config, std::uint64_t seed) {
  config.validate();
  auto a_seed = synth::substream(seed, 1, 10)();
  TrainState s{Peer{nn::clone_with_new_init(config.backbone, a_seed), nn::make_optimizer(config.optimizer)},
               std::nullopt, 0, {}};
  if (config.co_teaching) {
    auto b_seed = synth::substream(seed, 2, 10)();
    s.b.emplace(Peer{nn::clone_with_new_init(config.backbone, b_seed), nn::make_optimizer(config.optimizer)});
  }
  return s;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Mean loss over `selected` rows, backpropagated from the cached forward pass.
void update(Peer& peer, const edl::PerSampleLoss& loss, const std::vector<std::size_t>& selected) {
  const int n = loss.grad.n();
  nn::Tensor grad(n, 2, 1, 1);
  const double scale = 1.0 / static_cast<double>(selected.size());
  for (std::size_t i : selected) {
    grad[2 * i] = loss.grad[2 * i] * scale;
    grad[2 * i + 1] = loss.grad[2 * i + 1] * scale;
  }
  peer.model.zero_grad();
  peer.model.backward(grad);
  peer.optimizer->step(peer.model.parameters());
}

}  // namespace

StepReport coteach_step(TrainState& state, const Batch& batch, int epoch, const CoteachConfig& config) {
  if (batch.x.n() == 0) throw std::invalid_argument("coteach_step: empty batch");
  StepReport report;
  report.ratio = state.b ? selection_ratio(epoch, std::max(1, config.max_epochs), config.gamma) : 1.0;

  const auto logits_a = state.a.model.forward(batch.x, nn::Mode::train);
  const auto loss_a = per_sample_loss(config.loss_kind, logits_a, batch.labels, epoch, config.edl);
  report.mean_loss_a = mean_of(loss_a.loss);

  if (!state.b) {
    std::vector<std::size_t> all(batch.labels.size());
    std::iota(all.begin(), all.end(), 0);
    update(state.a, loss_a, all);
    report.selected_by_a = report.selected_by_b = std::move(all);
    return report;
  }

  const auto logits_b = state.b->model.forward(batch.x, nn::Mode::train);
  const auto loss_b = per_sample_loss(config.loss_kind, logits_b, batch.labels, epoch, config.edl);
  report.mean_loss_b = mean_of(loss_b.loss);

  // both selections come from pre-update weights
  report.selected_by_a = select_small_loss(loss_a.loss, report.ratio);
  report.selected_by_b = select_small_loss(loss_b.loss, report.ratio);
  update(*state.b, loss_b, report.selected_by_a);
  update(state.a, loss_a, report.selected_by_b);
  return report;
}

namespace {

struct ValScore {
  std::optional<double> auc;
  double patch_bacc = 0.0;
};

ValScore validate(nn::Backbone& model, std::span<const BiopsyCore> val, const CoteachConfig& config) {
  std::unique_ptr<Predictor> predictor;
  if (config.loss_kind == LossKind::edl)
    predictor = std::make_unique<EvidentialPredictor>(model, config.edl.activation);
  else
    predictor = std::make_unique<SoftmaxPredictor>(model);
  const auto preds = predict_cores(*predictor, val);

  ValScore s;
  double hit[2] = {0, 0}, total[2] = {0, 0};
  for (const auto& p : preds) {
    total[to_int(p.weak_label)] += 1;
    hit[to_int(p.weak_label)] += p.predicted_label == p.weak_label ? 1 : 0;
  }
  s.patch_bacc = 0.5 * ((total[0] ? hit[0] / total[0] : 0.0) + (total[1] ? hit[1] / total[1] : 0.0));
  const auto groups = eval::group_by_core(preds);
  std::vector<double> scores;
  std::vector<bool> positive;
  for (const auto& c : eval::aggregate_all(groups, 0.0)) {
    scores.push_back(*c.prediction.score);
    positive.push_back(c.label == Label::cancer);
  }
  const bool both = std::find(positive.begin(), positive.end(), true) != positive.end() &&
                    std::find(positive.begin(), positive.end(), false) != positive.end();
  if (both) s.auc = eval::roc_auc(scores, positive);
  return s;
}

// ties go to the newer snapshot
bool at_least_as_good(const ValScore& a, const ValScore& b) {
  const double aa = a.auc.value_or(-1.0), ba = b.auc.value_or(-1.0);
  if (aa != ba) return aa > ba;
  return a.patch_bacc >= b.patch_bacc;
}

}  // namespace

TrainResult train(std::span<const BiopsyCore> train_cores, std::span<const BiopsyCore> val_cores,
                  const CoteachConfig& config, std::uint64_t seed, const EpochSink& sink) {
  config.validate();
  if (train_cores.empty()) throw std::invalid_argument("train: empty training split");
  if (val_cores.empty()) throw std::invalid_argument("train: empty validation split");

  std::vector<const Patch*> patches;
  for (const auto& core : train_cores)
    for (const auto& p : core.patches()) patches.push_back(&p);

  TrainResult result{init_state(config, seed), nn::Backbone(config.backbone, 0), 'a', -1};
  auto& state = result.state;
  result.best = state.a.model;

  synth::Rng shuffle_rng = synth::substream(seed, 3, 10);
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<ValScore> best_score;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<double> losses_a, losses_b;
    double ratio = 1.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const Image*> imgs;
      Batch batch;
      for (std::size_t i = start; i < end; ++i) {
        imgs.push_back(&patches[order[i]]->pixels);
        batch.labels.push_back(patches[order[i]]->weak_label);
      }
      batch.x = batch_from_images(imgs);
      const auto step = coteach_step(state, batch, epoch, config);
      ratio = step.ratio;
      losses_a.push_back(step.mean_loss_a);
      if (state.b) losses_b.push_back(step.mean_loss_b);
    }
    state.epoch = epoch + 1;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.ratio = ratio;
    rec.train_loss_a = mean_of(losses_a);
    const ValScore va = validate(state.a.model, val_cores, config);
    rec.val_auc_a = va.auc;
    rec.val_patch_bacc_a = va.patch_bacc;
    if (!best_score || at_least_as_good(va, *best_score)) {
      best_score = va;
      result.best = state.a.model;
      result.best_peer = 'a';
      result.best_epoch = epoch;
    }
    if (state.b) {
      rec.train_loss_b = mean_of(losses_b);
      const ValScore vb = validate(state.b->model, val_cores, config);
      rec.val_auc_b = vb.auc;
      rec.val_patch_bacc_b = vb.patch_bacc;
      if (at_least_as_good(vb, *best_score)) {
        best_score = vb;
        result.best = state.b->model;
        result.best_peer = 'b';
        result.best_epoch = epoch;
      }
    }
    state.history.push_back(rec);
    if (sink) sink(rec);
  }
  return result;
}

}  // namespace evicore::coteach
