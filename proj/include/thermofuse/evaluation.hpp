#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "thermofuse/detection.hpp"

namespace thermofuse {

struct EvalConfig {
  double iou_match_thresh = 0.5;  // (0, 1]
  double score_thresh = 0.5;      // [0, 1)

  void validate() const;
};

/// One row of a match list. A class of -1 marks the background side: gt_class
/// -1 is an unmatched prediction (FP), pred_class -1 a missed GT box (FN).
struct GtMatch {
  int gt_class = -1;
  int pred_class = -1;
  double iou = 0.0;
  int gt_index = -1;
  int pred_index = -1;
};

/// Predictions below score_thresh are dropped, the rest visited by descending
/// score (equal scores keep input order) and matched to the unmatched GT box of
/// highest IoU >= iou_match_thresh, regardless of class. Predictions whose
/// class is outside [0, k) are ignored, with k the GT taxonomy's class count.
/// Throws CanvasMismatch.
std::vector<GtMatch> match_to_gt(const AnnotationSet& pred, const AnnotationSet& gt, const EvalConfig& cfg = {});

/// K true classes plus a trailing background row/column.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int k = 0);

  int classes() const noexcept { return k_; }
  int background() const noexcept { return k_; }
  std::int64_t at(int truth, int pred) const;
  std::int64_t& at(int truth, int pred);

  void add(std::span<const GtMatch> matches);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int pred) const;
  std::int64_t detections() const;       // predictions that survived filtering
  std::int64_t ground_truth() const;     // GT boxes
  std::int64_t false_negatives() const;  // missed GT
  std::int64_t false_positives() const;  // predictions with no GT

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const GtMatch> matches, int k);

struct ClassMetrics {
  std::string name;
  std::int64_t tp = 0;
  std::int64_t fp = 0;  // column sum minus diagonal
  std::int64_t fn = 0;  // row sum minus diagonal
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::int64_t detections = 0;
  std::int64_t ground_truth = 0;
  std::int64_t false_negatives = 0;
  std::int64_t false_positives = 0;
  std::int64_t images = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

double f1_score(double precision, double recall) noexcept;

/// Unweighted mean of per-class F1 values.
double macro_f1(std::span<const double> per_class_f1);

/// Class names come from `taxonomy` when it has at least cm.classes() entries.
MetricsReport macro_metrics(const ConfusionMatrix& cm, Taxonomy taxonomy = Taxonomy::Vis, std::int64_t images = 0);

/// Readable summary with detections, FN and FP (with integer percentages),
/// macro metrics and a per-class F1 table.
std::string render_report(const MetricsReport& r);

/// CSV: header `class,tp,fp,fn,precision,recall,f1`, one row per class, then
/// footer rows `macro`, `total`, `detections`, `ground_truth` and `images`.
std::string report_csv(const MetricsReport& r);
MetricsReport parse_report_csv(const std::string& text);

}  // namespace thermofuse
