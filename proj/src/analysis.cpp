#include "critsel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "critsel/errors.hpp"

namespace critsel {

MisalignmentReport misalignment_check(const std::vector<NamedDetections>& detectors,
                                      const Dataset& ds,
                                      const std::vector<ImportanceRecord>& records,
                                      double threshold, const EvalConfig& cfg) {
  if (detectors.size() < 2) {
    throw InputError("misalignment check needs at least two detector submissions");
  }

  MisalignmentReport report;
  report.threshold = threshold;
  for (const NamedDetections& det : detectors) {
    MisalignmentReport::DetectorScores scores;
    scores.name = det.name;
    scores.precision_critical =
        evaluate_filtered(*det.detections, ds, records, threshold, cfg).map50;
    scores.precision_full = evaluate(*det.detections, ds, cfg).map50;
    try {
      scores.precision_complement =
          evaluate_complement(*det.detections, ds, records, threshold, cfg).map50;
    } catch (const InputError&) {
      // Nothing below the threshold (typical at T = 0): no complement score.
      scores.precision_complement = std::numeric_limits<double>::quiet_NaN();
    }
    report.detectors.push_back(std::move(scores));
  }

  auto ranking = [&](auto key) {
    std::vector<std::size_t> order(report.detectors.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return key(report.detectors[a]) > key(report.detectors[b]);
    });
    return order;
  };
  report.ranking_critical =
      ranking([](const auto& d) { return d.precision_critical; });
  report.ranking_full = ranking([](const auto& d) { return d.precision_full; });

  for (std::size_t i = 0; i < report.detectors.size(); ++i) {
    for (std::size_t j = i + 1; j < report.detectors.size(); ++j) {
      const double d_critical =
          report.detectors[i].precision_critical - report.detectors[j].precision_critical;
      const double d_full =
          report.detectors[i].precision_full - report.detectors[j].precision_full;
      if (d_critical * d_full < 0.0) {
        report.flipped_pairs.emplace_back(i, j);
      }
    }
  }
  return report;
}

std::vector<std::vector<std::int64_t>> quantile_partition(
    const std::vector<ImportanceRecord>& records, int quantiles) {
  if (quantiles < 2) {
    throw InputError("quantile count must be at least 2, got " + std::to_string(quantiles));
  }
  std::vector<std::pair<double, std::int64_t>> pool;
  for (const ImportanceRecord& rec : records) {
    if (rec.skipped) continue;
    for (const ImportanceEntry& e : rec.entries) {
      pool.emplace_back(e.propagated_score, e.annotation_id);
    }
  }
  if (pool.size() < static_cast<std::size_t>(quantiles)) {
    throw InputError("cannot split " + std::to_string(pool.size()) + " annotations into " +
                     std::to_string(quantiles) + " groups");
  }
  std::sort(pool.begin(), pool.end());

  const std::size_t q = static_cast<std::size_t>(quantiles);
  const std::size_t base = pool.size() / q;
  const std::size_t remainder = pool.size() % q;

  std::vector<std::vector<std::int64_t>> groups(q);
  std::size_t next = 0;
  for (std::size_t g = 0; g < q; ++g) {
    const std::size_t take = base + (g < remainder ? 1 : 0);
    groups[g].reserve(take);
    for (std::size_t k = 0; k < take; ++k) groups[g].push_back(pool[next++].second);
  }
  return groups;
}

namespace {

std::vector<BBox> selected_boxes(const Dataset& ds, const std::set<std::int64_t>& ids) {
  std::vector<BBox> boxes;
  boxes.reserve(ids.size());
  for (std::int64_t id : ids) {
    const Annotation* ann = ds.find_annotation(id);
    if (!ann) {
      throw InputError("importance record references unknown annotation id " +
                       std::to_string(id));
    }
    boxes.push_back(ann->bbox);
  }
  return boxes;
}

}  // namespace

ConsistencyCurve consistency_curve(const Dataset& ds_a,
                                   const std::vector<ImportanceRecord>& records_a,
                                   const Dataset& ds_b,
                                   const std::vector<ImportanceRecord>& records_b,
                                   double fixed_threshold_a,
                                   const std::vector<double>& sweep_thresholds_b) {
  std::unordered_map<std::int64_t, const ImportanceRecord*> recs_a, recs_b;
  for (const ImportanceRecord& r : records_a) recs_a[r.image_id] = &r;
  for (const ImportanceRecord& r : records_b) recs_b[r.image_id] = &r;

  // Shared, scorable image set: present in both datasets with a non-skip
  // record on each side.
  std::vector<std::int64_t> shared;
  for (const ImageInfo& im : ds_a.images()) {
    if (!ds_b.has_image(im.id)) continue;
    auto a = recs_a.find(im.id);
    auto b = recs_b.find(im.id);
    if (a == recs_a.end() || b == recs_b.end()) continue;
    if (a->second->skipped || b->second->skipped) continue;
    shared.push_back(im.id);
  }
  std::sort(shared.begin(), shared.end());
  if (shared.empty()) {
    throw InputError("no shared scorable images between the two datasets");
  }

  ConsistencyCurve curve;
  for (double threshold_b : sweep_thresholds_b) {
    double iou_sum = 0.0;
    std::size_t used = 0;
    for (std::int64_t image_id : shared) {
      const auto sel_a = select(*recs_a.at(image_id), fixed_threshold_a);
      const auto sel_b = select(*recs_b.at(image_id), threshold_b);
      if (sel_a.empty() || sel_b.empty()) continue;

      const auto boxes_a = selected_boxes(ds_a, sel_a);
      auto boxes_both = selected_boxes(ds_b, sel_b);
      const double area_a = union_area(boxes_a);
      const double area_b = union_area(boxes_both);
      boxes_both.insert(boxes_both.end(), boxes_a.begin(), boxes_a.end());
      const double area_union = union_area(boxes_both);
      const double area_inter = area_a + area_b - area_union;
      iou_sum += area_union > 0.0 ? area_inter / area_union : 0.0;
      ++used;
    }
    curve.thresholds.push_back(threshold_b);
    curve.mean_iou.push_back(used ? iou_sum / static_cast<double>(used)
                                  : std::numeric_limits<double>::quiet_NaN());
    curve.removal_fraction.push_back(
        removal_fraction(records_b, threshold_b, ds_b.annotations().size()));
    curve.images_used.push_back(used);
  }
  return curve;
}

std::string curve_to_csv(const ConsistencyCurve& curve) {
  std::ostringstream os;
  os << "threshold,mean_iou,removal_fraction,images_used\n";
  os.setf(std::ios::fixed);
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    os.precision(6);
    os << curve.thresholds[i] << ",";
    if (std::isnan(curve.mean_iou[i])) {
      os << "nan";
    } else {
      os << curve.mean_iou[i];
    }
    os << "," << curve.removal_fraction[i] << "," << curve.images_used[i] << "\n";
  }
  return os.str();
}

}  // namespace critsel
