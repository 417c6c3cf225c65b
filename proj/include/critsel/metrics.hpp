#ifndef CRITSEL_METRICS_HPP
#define CRITSEL_METRICS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "critsel/coco_io.hpp"
#include "critsel/dataset.hpp"
#include "critsel/importance.hpp"

namespace critsel {

std::vector<double> default_iou_grid();  // 0.50:0.05:0.95, ten values

struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_grid();
  std::vector<int> max_detections = {1, 10, 100};  // per-image caps for recall
  int recall_points = 101;
  // Worker threads for the per-category sweep. Each category's numbers are
  // computed independently, so the result is identical for any value.
  int jobs = 1;

  // Throws InputError when thresholds are not strictly increasing in (0, 1]
  // or caps are not strictly increasing positives.
  void validate() const;
};

// Greedy confidence-ordered matching for one image and category.
struct MatchResult {
  // Parallel to the input detections: matched annotation id, or nullopt
  // for a false positive.
  std::vector<std::optional<std::int64_t>> detection_match;
  // Parallel to the input annotations.
  std::vector<bool> annotation_matched;
};

// Detections must be sorted by score descending (stable). Each detection
// takes the unmatched annotation with the highest IOU when that IOU
// reaches the threshold; IOU ties go to the lower annotation id.
MatchResult match(const std::vector<const Detection*>& detections,
                  const std::vector<const Annotation*>& annotations,
                  double iou_threshold);

// Matched-detection fraction; absent when there are no detections.
std::optional<double> precision_at(const std::vector<const Detection*>& detections,
                                   const std::vector<const Annotation*>& annotations,
                                   double iou_threshold);

// One category's detections pooled across images: score plus whether the
// greedy matcher paired it with an annotation.
struct PooledDetection {
  double score = 0.0;
  bool true_positive = false;
};

// COCO-style interpolated AP: cumulative TP/FP in score order, precision
// envelope made non-increasing, sampled at evenly spaced recall levels.
// gt_count must be >= 1.
double average_precision(std::vector<PooledDetection> pooled, std::size_t gt_count,
                         int recall_points);

struct CategoryMetrics {
  std::int64_t category_id = 0;
  std::string name;
  double ap = 0.0;     // mean over the IOU grid
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar1 = 0.0;    // mean recall over the grid at each detection cap
  double ar10 = 0.0;
  double ar100 = 0.0;
  double ar1_50 = 0.0;  // recall at IOU 0.50, top-1 detections
  std::size_t gt_count = 0;
};

struct MetricsReport {
  double map = 0.0;
  double map50 = 0.0;
  double map75 = 0.0;
  double mar1 = 0.0;
  double mar10 = 0.0;
  double mar100 = 0.0;
  double mar1_50 = 0.0;
  double f1 = 0.0;  // harmonic mean of map50 and mar1_50

  std::vector<CategoryMetrics> per_category;  // ascending id; only scored cats

  std::size_t gt_used = 0;
  std::size_t detections_used = 0;
  std::size_t images_evaluated = 0;
  std::size_t images_skipped = 0;        // filtered evaluation only
  std::size_t annotations_removed = 0;   // filtered evaluation only
  std::size_t categories_excluded = 0;   // zero remaining ground truth
};

// Full-dataset evaluation. Throws InputError when no category has ground
// truth ("no categories to evaluate").
MetricsReport evaluate(const DetectionSet& detections, const Dataset& gts,
                       const EvalConfig& cfg = {});

// Evaluation against an explicit per-image annotation subset: only images
// present in the map take part, and within them only the listed ids exist
// as ground truth. Detections on removed annotations become false
// positives; detections on absent images are dropped.
MetricsReport evaluate_subset(const DetectionSet& detections, const Dataset& ds,
                              const std::map<std::int64_t, std::set<std::int64_t>>& keep_by_image,
                              const EvalConfig& cfg = {});

// Ground truth restricted per image to annotations with propagated
// importance above the threshold; skipped images leave the evaluation
// entirely. Records must cover every annotated image of the dataset.
MetricsReport evaluate_filtered(const DetectionSet& detections, const Dataset& ds,
                                const std::vector<ImportanceRecord>& records,
                                double threshold, const EvalConfig& cfg = {});

// Same image set as evaluate_filtered but with the complementary
// annotations (those at or below the threshold) as ground truth.
MetricsReport evaluate_complement(const DetectionSet& detections, const Dataset& ds,
                                  const std::vector<ImportanceRecord>& records,
                                  double threshold, const EvalConfig& cfg = {});

// Keeps only each image's top-scoring detections (all categories pooled);
// cap <= 0 means unlimited.
DetectionSet cap_detections(const DetectionSet& detections, int per_image_cap);

nlohmann::json report_to_json(const MetricsReport& report, const EvalConfig& cfg);

// Aligned plain-text table with the eight headline metrics and counts.
std::string report_table(const MetricsReport& report);

}  // namespace critsel

#endif  // CRITSEL_METRICS_HPP
