#include "evicore/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace evicore::eval {

namespace {

int bin_index(double conf, int bins) {
  if (conf <= 0.0) return 0;
  int s = static_cast<int>(std::ceil(conf * bins)) - 1;
  s = std::clamp(s, 0, bins - 1);
  // guard against rounding in conf * bins: bin s covers (s / S, (s + 1) / S]
  while (s > 0 && conf <= static_cast<double>(s) / bins) --s;
  while (s < bins - 1 && conf > static_cast<double>(s + 1) / bins) ++s;
  return s;
}

}  // namespace

CalibrationReport ece(std::span<const ScoredOutcome> predictions, int bins) {
  if (predictions.empty()) throw std::invalid_argument("ece: no predictions");
  if (bins < 1) throw std::invalid_argument("ece: need at least one bin");

  std::vector<double> conf_sum(bins, 0.0), correct(bins, 0.0);
  CalibrationReport report;
  report.bins.assign(bins, {});
  for (const auto& p : predictions) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) throw std::invalid_argument("ece: confidence outside [0, 1]");
    const int s = bin_index(p.confidence, bins);
    ++report.bins[s].count;
    conf_sum[s] += p.confidence;
    correct[s] += p.correct ? 1.0 : 0.0;
  }
  report.total = predictions.size();
  const double n = static_cast<double>(report.total);
  for (int s = 0; s < bins; ++s) {
    auto& b = report.bins[s];
    if (b.count == 0) continue;
    b.confidence = conf_sum[s] / b.count;
    b.accuracy = correct[s] / b.count;
    report.ece += (b.count / n) * std::abs(b.accuracy - b.confidence);
  }
  return report;
}

std::vector<ScoredOutcome> outcomes(std::span<const PatchPrediction> predictions, LabelSource source) {
  std::vector<ScoredOutcome> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    Label y = p.weak_label;
    if (source == LabelSource::truth) {
      if (!p.true_label) throw std::invalid_argument("prediction carries no ground-truth label");
      y = *p.true_label;
    }
    out.push_back({p.confidence, p.predicted_label == y});
  }
  return out;
}

CorePrediction aggregate_core(std::span<const PatchPrediction> patches, double tau) {
  if (patches.empty()) throw std::invalid_argument("aggregate_core: no patches");
  CorePrediction out;
  out.core_id = patches.front().core_id;
  out.threshold = tau;
  double sum = 0.0;
  std::size_t kept = 0;
  for (const auto& p : patches) {
    if (p.confidence < tau) continue;
    sum += p.prob_cancer;
    ++kept;
  }
  out.retained_fraction = static_cast<double>(kept) / static_cast<double>(patches.size());
  if (out.retained_fraction < kMinRetainedFraction) {
    out.status = CoreStatus::uncertain;
  } else {
    out.status = CoreStatus::predicted;
    out.score = sum / static_cast<double>(kept);
  }
  return out;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks for ties
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double n_pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (positive[i]) {
      n_pos += 1;
      rank_sum += rank[i];
    }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: both classes are required");
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

CoreMetrics core_metrics(std::span<const CoreOutcome> cores) {
  CoreMetrics m;
  std::vector<double> scores;
  std::vector<bool> positive;
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& c : cores) {
    if (c.prediction.status == CoreStatus::uncertain) {
      ++m.uncertain;
      continue;
    }
    ++m.predicted;
    const double s = *c.prediction.score;
    const bool is_cancer = c.label == Label::cancer;
    scores.push_back(s);
    positive.push_back(is_cancer);
    const bool called = s > 0.5;
    if (is_cancer) (called ? tp : fn) += 1;
    else (called ? fp : tn) += 1;
  }
  if (tp + fn == 0 || tn + fp == 0) throw std::invalid_argument("core_metrics: both classes must be among predicted cores");
  m.auc = roc_auc(scores, positive);
  m.sensitivity = tp / (tp + fn);
  m.specificity = tn / (tn + fp);
  m.balanced_accuracy = 0.5 * (m.sensitivity + m.specificity);
  return m;
}

double patch_balanced_accuracy(std::span<const PatchPrediction> predictions, LabelSource source) {
  double hit[2] = {0, 0}, total[2] = {0, 0};
  for (const auto& o : predictions) {
    Label y = o.weak_label;
    if (source == LabelSource::truth) {
      if (!o.true_label) throw std::invalid_argument("prediction carries no ground-truth label");
      y = *o.true_label;
    }
    total[to_int(y)] += 1;
    if (o.predicted_label == y) hit[to_int(y)] += 1;
  }
  if (total[0] == 0 || total[1] == 0) throw std::invalid_argument("patch_balanced_accuracy: both classes are required");
  return 0.5 * (hit[0] / total[0] + hit[1] / total[1]);
}

std::vector<std::vector<PatchPrediction>> group_by_core(std::span<const PatchPrediction> predictions) {
  std::vector<std::vector<PatchPrediction>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : predictions) {
    auto [it, fresh] = index.emplace(p.core_id, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(p);
  }
  return groups;
}

std::vector<CoreOutcome> aggregate_all(std::span<const std::vector<PatchPrediction>> cores, double tau) {
  std::vector<CoreOutcome> out;
  out.reserve(cores.size());
  for (const auto& core : cores) out.push_back({aggregate_core(core, tau), core.front().weak_label});
  return out;
}

std::vector<CurvePoint> accuracy_vs_confidence_curve(std::span<const PatchPrediction> predictions,
                                                     std::span<const double> tau_grid) {
  const auto cores = group_by_core(predictions);
  std::vector<CurvePoint> curve;
  curve.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    CurvePoint pt;
    pt.tau = tau;
    pt.total_cores = cores.size();
    double hit[2] = {0, 0}, total[2] = {0, 0};
    for (const auto& c : aggregate_all(cores, tau)) {
      if (c.prediction.status != CoreStatus::predicted) continue;
      ++pt.retained_cores;
      const int y = to_int(c.label);
      total[y] += 1;
      if ((*c.prediction.score > 0.5) == (y == 1)) hit[y] += 1;
    }
    if (total[0] > 0 && total[1] > 0) pt.balanced_accuracy = 0.5 * (hit[0] / total[0] + hit[1] / total[1]);
    curve.push_back(pt);
  }
  return curve;
}

std::optional<OodSummary> ood_summary(std::span<const PatchPrediction> predictions) {
  OodSummary s;
  std::vector<double> scores;
  std::vector<bool> flags;
  double sum_ood = 0, sum_id = 0;
  for (const auto& p : predictions) {
    if (!p.is_ood) continue;
    const double u = 1.0 - p.confidence;
    scores.push_back(u);
    flags.push_back(*p.is_ood);
    if (*p.is_ood) {
      sum_ood += u;
      ++s.n_ood;
    } else {
      sum_id += u;
      ++s.n_id;
    }
  }
  if (s.n_ood == 0 || s.n_id == 0) return std::nullopt;
  s.mean_uncertainty_ood = sum_ood / s.n_ood;
  s.mean_uncertainty_id = sum_id / s.n_id;
  s.auroc = roc_auc(scores, flags);
  return s;
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "tau,balanced_accuracy,retained_cores,total_cores\n";
  for (const auto& p : curve) {
    out << p.tau << ',';
    if (p.balanced_accuracy) out << *p.balanced_accuracy;
    out << ',' << p.retained_cores << ',' << p.total_cores << '\n';
  }
}

void write_reliability_csv(const std::filesystem::path& path, const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "bin,n,conf,acc\n";
  for (std::size_t s = 0; s < report.bins.size(); ++s)
    out << s + 1 << ',' << report.bins[s].count << ',' << report.bins[s].confidence << ',' << report.bins[s].accuracy
        << '\n';
}

}  // namespace evicore::eval
