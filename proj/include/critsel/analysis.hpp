#ifndef CRITSEL_ANALYSIS_HPP
#define CRITSEL_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "critsel/dataset.hpp"
#include "critsel/importance.hpp"
#include "critsel/metrics.hpp"

namespace critsel {

struct NamedDetections {
  std::string name;
  const DetectionSet* detections = nullptr;
};

// Rank comparison of detectors scored on the critical subset versus the
// full annotation set. Precision here is IOU-0.50 mean average precision,
// the headline proposal-quality number.
struct MisalignmentReport {
  double threshold = 0.0;
  struct DetectorScores {
    std::string name;
    double precision_critical = 0.0;    // filtered ground truth at T
    double precision_full = 0.0;        // all annotations
    double precision_complement = 0.0;  // annotations at or below T
  };
  std::vector<DetectorScores> detectors;  // input order

  // Detector indices ordered by descending precision (ties by input order).
  std::vector<std::size_t> ranking_critical;
  std::vector<std::size_t> ranking_full;

  // Pairs (i, j) whose strict order under the critical subset opposes
  // their strict order under the full set.
  std::vector<std::pair<std::size_t, std::size_t>> flipped_pairs;

  bool flip() const { return !flipped_pairs.empty(); }
};

// Requires at least two detector submissions over the same vocabulary.
MisalignmentReport misalignment_check(const std::vector<NamedDetections>& detectors,
                                      const Dataset& ds,
                                      const std::vector<ImportanceRecord>& records,
                                      double threshold, const EvalConfig& cfg = {});

// Pools every scored annotation across images, ranks by propagated
// importance (ties by annotation id), and splits into q equal-count groups
// ordered ascending by importance; any remainder goes to the lowest groups.
std::vector<std::vector<std::int64_t>> quantile_partition(
    const std::vector<ImportanceRecord>& records, int quantiles);

// Cross-dataset agreement of the selected regions as dataset B's threshold
// sweeps: per shared image, the Jaccard of the two selected-region unions.
struct ConsistencyCurve {
  std::vector<double> thresholds;
  std::vector<double> mean_iou;          // NaN when no image qualifies
  std::vector<double> removal_fraction;  // of dataset B's annotations
  std::vector<std::size_t> images_used;
};

ConsistencyCurve consistency_curve(const Dataset& ds_a,
                                   const std::vector<ImportanceRecord>& records_a,
                                   const Dataset& ds_b,
                                   const std::vector<ImportanceRecord>& records_b,
                                   double fixed_threshold_a,
                                   const std::vector<double>& sweep_thresholds_b);

// "threshold,mean_iou,removal_fraction,images_used" rows, header included.
std::string curve_to_csv(const ConsistencyCurve& curve);

}  // namespace critsel

#endif  // CRITSEL_ANALYSIS_HPP
