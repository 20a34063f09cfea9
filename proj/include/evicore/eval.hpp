#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evicore/domain.hpp"

namespace evicore::eval {

struct PatchPrediction {
  double prob_cancer = 0.5;
  double confidence = 0.0;
  Label predicted_label = Label::benign;
  std::string core_id;
  Label weak_label = Label::benign;
  std::optional<Label> true_label;
  std::optional<bool> is_ood;
};

struct ScoredOutcome {
  double confidence = 0.0;
  bool correct = false;
};

/// Expected calibration error over S equal-width bins ((s-1)/S, s/S]; confidence 0 falls in
/// the first bin and empty bins contribute nothing.
CalibrationReport ece(std::span<const ScoredOutcome> predictions, int bins = 10);

enum class LabelSource { weak, truth };

/// (confidence, predicted == label) pairs against the chosen label source.
std::vector<ScoredOutcome> outcomes(std::span<const PatchPrediction> predictions, LabelSource source);

/// Minimum share of a core's patches that must clear the threshold for a core-level call.
inline constexpr double kMinRetainedFraction = 0.6;

/// Drops patches with confidence < tau; the core is uncertain when fewer than 60 % remain,
/// otherwise its score is the mean cancer probability of the retained patches.
CorePrediction aggregate_core(std::span<const PatchPrediction> patches, double tau);

/// Rank-based AUC (Mann-Whitney, ties count one half). Throws when a class is missing.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

struct CoreOutcome {
  CorePrediction prediction;
  Label label = Label::benign;
};

struct CoreMetrics {
  double auc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t predicted = 0;
  std::size_t uncertain = 0;
};

/// AUC over predicted-core scores, sensitivity/specificity at score > 0.5. Uncertain cores are
/// excluded and counted separately.
CoreMetrics core_metrics(std::span<const CoreOutcome> cores);

/// Mean of per-class recall against the chosen label source. Throws when a class is missing.
double patch_balanced_accuracy(std::span<const PatchPrediction> predictions, LabelSource source);

struct CurvePoint {
  double tau = 0.0;
  std::optional<double> balanced_accuracy;
  std::size_t retained_cores = 0;
  std::size_t total_cores = 0;
};

/// Groups patch predictions by core, preserving first-seen order of cores.
std::vector<std::vector<PatchPrediction>> group_by_core(std::span<const PatchPrediction> predictions);

/// Core outcomes (core label = weak label) for every core at threshold tau.
std::vector<CoreOutcome> aggregate_all(std::span<const std::vector<PatchPrediction>> cores, double tau);

std::vector<CurvePoint> accuracy_vs_confidence_curve(std::span<const PatchPrediction> predictions,
                                                     std::span<const double> tau_grid);

struct OodSummary {
  double mean_uncertainty_ood = 0.0;
  double mean_uncertainty_id = 0.0;
  double auroc = 0.0;
  std::size_t n_ood = 0;
  std::size_t n_id = 0;
};

/// Uncertainty (1 - confidence) as an OOD score; nullopt when either group is empty.
std::optional<OodSummary> ood_summary(std::span<const PatchPrediction> predictions);

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);
void write_reliability_csv(const std::filesystem::path& path, const CalibrationReport& report);

}  // namespace evicore::eval
