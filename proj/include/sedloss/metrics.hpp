#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sedloss/grid.hpp"

namespace sedloss {

struct EvalConfig {
  double threshold = 0.5;  // frame is active when score >= threshold
};

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
  /// 2TP / (2TP + FP + FN); zero when the denominator is zero.
  double f1() const noexcept;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct ConfusionCounts {
  std::vector<Confusion> per_class;
  Confusion pooled;
};

struct FScores {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<double> per_class;
};

struct MetricsReport {
  double micro_f = 0.0;
  double macro_f = 0.0;
  double micro_auc = 0.0;
  double macro_auc = 0.0;
  std::vector<double> per_class_f;
  ConfusionCounts confusion;
};

enum class AucMode { kMicro, kMacro };

LabelGrid predict_labels(const PredictionGrid& y, double threshold);

ConfusionCounts confusion_counts(std::span<const LabelGrid> pred, std::span<const LabelGrid> truth);

/// Per-class F1, unweighted macro mean (degenerate classes count as 0) and
/// micro F1 on counts pooled over all classes.
FScores fscores(std::span<const LabelGrid> pred, std::span<const LabelGrid> truth);

/// Rank-based ROC AUC with average ranks for ties. Micro pools every
/// class-frame; macro averages the classes that have both positives and
/// negatives. Throws ValidationError when no valid class (or pool) exists.
double roc_auc(std::span<const PredictionGrid> y, std::span<const LabelGrid> z, AucMode mode);

/// AUC of one score list. Throws ValidationError without both label values.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

MetricsReport evaluate(std::span<const PredictionGrid> y, std::span<const LabelGrid> z,
                       const EvalConfig& cfg = {});

/// Metrics CSV: method,params,micro_f,macro_f,micro_auc,macro_auc,f_<class>...
void write_metrics_header(std::ostream& os, const std::vector<std::string>& class_names);
void write_metrics_row(std::ostream& os, const std::string& method, const std::string& params,
                       const MetricsReport& report);

}  // namespace sedloss
