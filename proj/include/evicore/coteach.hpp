#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "evicore/domain.hpp"
#include "evicore/edl.hpp"
#include "evicore/losses.hpp"
#include "evicore/nn/backbone.hpp"
#include "evicore/nn/optimizer.hpp"

namespace evicore::coteach {

/// R(e) = 1 - min(e / e_max, gamma), epochs counted from 0.
double selection_ratio(int epoch, int max_epochs, double gamma);

/// Indices of the max(1, floor(R * N)) smallest losses (ties: lower index first), ascending.
std::vector<std::size_t> select_small_loss(std::span<const double> losses, double ratio);

struct CoteachConfig {
  double gamma = 0.4;
  int max_epochs = 30;
  int batch_size = 64;
  nn::OptimizerConfig optimizer;
  LossKind loss_kind = LossKind::edl;
  edl::EdlLossConfig edl;
  bool co_teaching = true;  // false: single model, R fixed at 1
  nn::BackboneConfig backbone;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double ratio = 1.0;
  double train_loss_a = 0.0;
  std::optional<double> train_loss_b;
  std::optional<double> val_auc_a;
  std::optional<double> val_auc_b;
  double val_patch_bacc_a = 0.0;
  std::optional<double> val_patch_bacc_b;
};

struct Peer {
  nn::Backbone model;
  std::unique_ptr<nn::Optimizer> optimizer;
};

struct TrainState {
  Peer a;
  std::optional<Peer> b;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

/// Peers initialized from independent streams of `seed` (b only when co-teaching).
TrainState init_state(const CoteachConfig& config, std::uint64_t seed);

struct Batch {
  nn::Tensor x;
  std::vector<Label> labels;
};

struct StepReport {
  double ratio = 1.0;
  std::vector<std::size_t> selected_by_a;  // trains b
  std::vector<std::size_t> selected_by_b;  // trains a
  double mean_loss_a = 0.0;
  double mean_loss_b = 0.0;
};

/// One co-teaching update. Both peers score the full batch with their current weights; each
/// peer's small-loss subset then drives one optimizer step of the other peer. Without a
/// second peer this is a plain full-batch step.
StepReport coteach_step(TrainState& state, const Batch& batch, int epoch, const CoteachConfig& config);

using EpochSink = std::function<void(const EpochRecord&)>;

struct TrainResult {
  TrainState state;
  nn::Backbone best;
  char best_peer = 'a';
  int best_epoch = -1;
};

/// Runs max_epochs epochs over shuffled batches, scoring both peers on the validation cores
/// after every epoch. The returned `best` is the peer snapshot with the highest validation
/// core AUC (weak labels, no rejection), ties broken by validation patch balanced accuracy (weak labels), then by the later snapshot.
TrainResult train(std::span<const BiopsyCore> train_cores, std::span<const BiopsyCore> val_cores,
                  const CoteachConfig& config, std::uint64_t seed, const EpochSink& sink = {});

}  // namespace evicore::coteach
