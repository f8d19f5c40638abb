#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "harborscan/annotation.hpp"
#include "harborscan/decode.hpp"

namespace harborscan {

class EmptyGroundTruth : public std::runtime_error {
 public:
  EmptyGroundTruth() : std::runtime_error("class has no ground-truth objects (P = 0)") {}
};

class NoDefinedClasses : public std::runtime_error {
 public:
  NoDefinedClasses() : std::runtime_error("no class with a defined AP") {}
};

// Ground truth and predictions for one image.
struct ImageEvalInput {
  std::string id;
  std::vector<AnnotationRecord> ground_truth;
  std::vector<Detection> predictions;
};

struct RankedOutcome {
  double confidence = 0.0;
  bool tp = false;
  double iou = 0.0;  // IoU with the best unmatched ground truth at decision time
  std::size_t image = 0;
  std::size_t rank_in_image = 0;
};

// Per-class matching outcome. outcomes are in global ranking order
// (confidence descending, ties by image order then in-image rank).
struct ClassMatch {
  int class_id = 0;
  std::vector<RankedOutcome> outcomes;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t positives = 0;  // P = TP + FN = ground-truth count
};

struct MatchResult {
  double iou_threshold = 0.5;
  std::vector<ClassMatch> classes;  // index = class id
};

// Per image and class, predictions are visited by descending confidence
// (ties: higher best-IoU, then input order). A prediction is TP when its
// best-IoU unmatched same-class ground truth reaches iou_threshold; that
// ground truth is then consumed. Everything else is FP; leftovers are FN.
MatchResult match_predictions(std::span<const ImageEvalInput> images, double iou_threshold, std::size_t num_classes);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;   // one per ranked prediction
  std::vector<double> envelope;  // max precision at or after each point
  std::size_t positives = 0;
};

PRCurve pr_curve(const ClassMatch& m);
PRCurve pr_curve(const std::vector<bool>& ranked_tp, std::size_t positives);

// All-points interpolation: area under the monotone precision envelope.
// Throws EmptyGroundTruth when the curve has no positives.
double average_precision(const PRCurve& curve);

// Arithmetic mean over the defined entries. Throws NoDefinedClasses.
double mean_ap(std::span<const std::optional<double>> aps);
double mean_ap(std::span<const double> aps);

struct ClassMetrics {
  std::optional<double> ap;
  double fnr = 0.0;        // FN / P, computed as 1 - recall
  double fp_over_p = 0.0;  // FP / P
  double recall = 0.0;     // TP / P
  double precision = 0.0;  // TP / (TP + FP) at the end of the ranking; 0 without predictions
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t positives = 0;
};

// Throws EmptyGroundTruth when tp + fn == 0.
ClassMetrics class_rates(std::size_t tp, std::size_t fp, std::size_t fn);
// Also fills ap.
ClassMetrics class_rates(const ClassMatch& m);

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t positives = 0;
};

struct ThresholdReport {
  double iou_threshold = 0.5;
  std::vector<ClassCounts> counts;                  // every class
  std::vector<std::optional<ClassMetrics>> metrics;  // nullopt for classes with P = 0
  std::optional<double> map;                        // nullopt when no class is defined
};

struct EvalReport {
  std::vector<ThresholdReport> thresholds;
  std::vector<int> evaluated_classes;  // classes entering mAP (when they have positives)
  std::string matching_rule = "greedy-confidence-descending-best-iou";
  std::string ap_interpolation = "all-points";
};

// 0.50, 0.55, ..., 0.95.
std::vector<double> default_sweep_thresholds();

// Re-matches at every threshold. `classes` restricts mAP to a subset (for
// example the four main categories); empty means all classes.
EvalReport iou_sweep(std::span<const ImageEvalInput> images, std::span<const double> thresholds,
                     std::size_t num_classes, std::span<const int> classes = {});

std::string report_json(const EvalReport& report, const ClassList& classes);
// threshold,class,AP,FNR,FP_over_P,TP,FP,FN
std::string report_csv(const EvalReport& report, const ClassList& classes);

}  // namespace harborscan
