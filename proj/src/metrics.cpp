#include "critsel/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "critsel/errors.hpp"

namespace critsel {

namespace {

using nlohmann::json;

std::vector<std::vector<double>> iou_matrix(const std::vector<const Detection*>& dets,
                                            const std::vector<const Annotation*>& gts) {
  std::vector<std::vector<double>> m(dets.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      m[d][g] = iou(dets[d]->bbox, gts[g]->bbox);
    }
  }
  return m;
}

// Greedy confidence-ordered assignment. Annotations are scanned in
// ascending-id order, and only a strictly better IOU displaces the current
// candidate, so IOU ties resolve to the lower annotation id.
std::vector<int> greedy_assign(const std::vector<std::vector<double>>& ious,
                               std::size_t gt_count, double iou_threshold) {
  std::vector<int> assignment(ious.size(), -1);
  std::vector<bool> taken(gt_count, false);
  for (std::size_t d = 0; d < ious.size(); ++d) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gt_count; ++g) {
      if (taken[g]) continue;
      if (ious[d][g] > best_iou) {
        best_iou = ious[d][g];
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      assignment[d] = best;
      taken[best] = true;
    }
  }
  return assignment;
}

struct ImageSlice {
  std::int64_t image_id = 0;
  // Ascending annotation id within each category.
  std::map<std::int64_t, std::vector<const Annotation*>> gts_by_category;
  // Score descending, ties in input order; one list per category, plus the
  // same split after each per-image top-k cap (all categories pooled before
  // capping).
  std::map<std::int64_t, std::vector<const Detection*>> dets_by_category;
  std::map<int, std::map<std::int64_t, std::vector<const Detection*>>> capped_by_category;
  std::size_t detection_count = 0;
};

std::map<std::int64_t, std::vector<const Detection*>> split_by_category(
    const std::vector<const Detection*>& dets) {
  std::map<std::int64_t, std::vector<const Detection*>> out;
  for (const Detection* d : dets) out[d->category_id].push_back(d);
  return out;
}

const std::vector<const Annotation*> kNoAnnotations;
const std::vector<const Detection*> kNoDetections;

const std::vector<const Annotation*>& gts_of(const ImageSlice& slice, std::int64_t cat) {
  auto it = slice.gts_by_category.find(cat);
  return it == slice.gts_by_category.end() ? kNoAnnotations : it->second;
}

const std::vector<const Detection*>& dets_of(
    const std::map<std::int64_t, std::vector<const Detection*>>& by_cat, std::int64_t cat) {
  auto it = by_cat.find(cat);
  return it == by_cat.end() ? kNoDetections : it->second;
}

std::size_t count_matched(const std::vector<const Detection*>& dets,
                          const std::vector<const Annotation*>& gts, double gamma) {
  if (dets.empty() || gts.empty()) return 0;
  const auto assignment = greedy_assign(iou_matrix(dets, gts), gts.size(), gamma);
  std::size_t matched = 0;
  for (int a : assignment) {
    if (a >= 0) ++matched;
  }
  return matched;
}

// gt annotations per evaluated image, ordered by image id; the image list
// itself defines which detections take part.
MetricsReport evaluate_core(
    const DetectionSet& detections, const Dataset& ds,
    const std::vector<std::pair<std::int64_t, std::vector<const Annotation*>>>& gt_images,
    const EvalConfig& cfg) {
  cfg.validate();

  // Recall caps: the configured list plus the fixed top-1 slice that the
  // IOU-0.50 recall (and hence F1) is defined on.
  std::vector<int> caps = cfg.max_detections;
  if (std::find(caps.begin(), caps.end(), 1) == caps.end()) caps.push_back(1);
  std::sort(caps.begin(), caps.end());

  std::vector<ImageSlice> slices;
  slices.reserve(gt_images.size());
  std::map<std::int64_t, std::size_t> gt_totals;
  std::size_t detections_used = 0;

  for (const auto& [image_id, gts] : gt_images) {
    ImageSlice slice;
    slice.image_id = image_id;
    for (const Annotation* a : gts) slice.gts_by_category[a->category_id].push_back(a);
    for (const Annotation* a : gts) gt_totals[a->category_id]++;

    auto det_it = detections.by_image.find(image_id);
    if (det_it != detections.by_image.end()) {
      std::vector<const Detection*> dets;
      dets.reserve(det_it->second.size());
      for (const Detection& d : det_it->second) dets.push_back(&d);
      std::stable_sort(dets.begin(), dets.end(),
                       [](const Detection* a, const Detection* b) { return a->score > b->score; });
      slice.detection_count = dets.size();
      detections_used += dets.size();
      slice.dets_by_category = split_by_category(dets);
      for (int cap : caps) {
        const std::size_t take = std::min<std::size_t>(dets.size(), static_cast<std::size_t>(cap));
        slice.capped_by_category[cap] = split_by_category(
            std::vector<const Detection*>(dets.begin(), dets.begin() + take));
      }
    }
    slices.push_back(std::move(slice));
  }

  // Scored categories: ascending id, at least one ground-truth annotation.
  std::vector<const Category*> cats;
  for (const Category& c : ds.vocabulary().categories()) cats.push_back(&c);
  std::sort(cats.begin(), cats.end(),
            [](const Category* a, const Category* b) { return a->id < b->id; });

  MetricsReport report;
  report.images_evaluated = slices.size();
  report.detections_used = detections_used;

  const std::vector<double>& grid = cfg.iou_thresholds;
  const double kGamma50 = 0.50;
  const double kGamma75 = 0.75;

  std::vector<const Category*> scored;
  for (const Category* cat : cats) {
    auto total_it = gt_totals.find(cat->id);
    if (total_it == gt_totals.end() || total_it->second == 0) {
      report.categories_excluded++;
    } else {
      scored.push_back(cat);
    }
  }
  if (scored.empty()) {
    throw InputError("no categories to evaluate (empty ground truth)");
  }

  const auto score_category = [&](const Category* cat) {
    const std::size_t gt_count = gt_totals.at(cat->id);

    // AP at one threshold: pool per-image greedy matches across the
    // dataset, then integrate the interpolated PR curve.
    auto ap_at = [&](double gamma) {
      std::vector<PooledDetection> pooled;
      for (const ImageSlice& slice : slices) {
        const auto& dets = dets_of(slice.dets_by_category, cat->id);
        if (dets.empty()) continue;
        const auto& gts = gts_of(slice, cat->id);
        std::vector<int> assignment;
        if (!gts.empty()) {
          assignment = greedy_assign(iou_matrix(dets, gts), gts.size(), gamma);
        } else {
          assignment.assign(dets.size(), -1);
        }
        for (std::size_t d = 0; d < dets.size(); ++d) {
          pooled.push_back({dets[d]->score, assignment[d] >= 0});
        }
      }
      return average_precision(std::move(pooled), gt_count, cfg.recall_points);
    };

    auto recall_at = [&](double gamma, int cap) {
      std::size_t matched = 0;
      for (const ImageSlice& slice : slices) {
        auto cap_it = slice.capped_by_category.find(cap);
        if (cap_it == slice.capped_by_category.end()) continue;
        matched += count_matched(dets_of(cap_it->second, cat->id), gts_of(slice, cat->id), gamma);
      }
      return static_cast<double>(matched) / static_cast<double>(gt_count);
    };

    CategoryMetrics cm;
    cm.category_id = cat->id;
    cm.name = cat->name;
    cm.gt_count = gt_count;

    double ap_sum = 0.0;
    for (double gamma : grid) ap_sum += ap_at(gamma);
    cm.ap = ap_sum / static_cast<double>(grid.size());
    cm.ap50 = ap_at(kGamma50);
    cm.ap75 = ap_at(kGamma75);

    auto ar_over_grid = [&](int cap) {
      double sum = 0.0;
      for (double gamma : grid) sum += recall_at(gamma, cap);
      return sum / static_cast<double>(grid.size());
    };
    if (std::find(cfg.max_detections.begin(), cfg.max_detections.end(), 1) !=
        cfg.max_detections.end()) {
      cm.ar1 = ar_over_grid(1);
    }
    if (std::find(cfg.max_detections.begin(), cfg.max_detections.end(), 10) !=
        cfg.max_detections.end()) {
      cm.ar10 = ar_over_grid(10);
    }
    if (std::find(cfg.max_detections.begin(), cfg.max_detections.end(), 100) !=
        cfg.max_detections.end()) {
      cm.ar100 = ar_over_grid(100);
    }
    cm.ar1_50 = recall_at(kGamma50, 1);
    return cm;
  };

  report.per_category.resize(scored.size());
  const int workers = std::min<int>(std::max(1, cfg.jobs), static_cast<int>(scored.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < scored.size(); ++i) {
      report.per_category[i] = score_category(scored[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&]() {
      try {
        for (std::size_t i = next.fetch_add(1); i < scored.size(); i = next.fetch_add(1)) {
          report.per_category[i] = score_category(scored[i]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (const CategoryMetrics& cm : report.per_category) report.gt_used += cm.gt_count;

  const double n = static_cast<double>(report.per_category.size());
  for (const CategoryMetrics& cm : report.per_category) {
    report.map += cm.ap;
    report.map50 += cm.ap50;
    report.map75 += cm.ap75;
    report.mar1 += cm.ar1;
    report.mar10 += cm.ar10;
    report.mar100 += cm.ar100;
    report.mar1_50 += cm.ar1_50;
  }
  report.map /= n;
  report.map50 /= n;
  report.map75 /= n;
  report.mar1 /= n;
  report.mar10 /= n;
  report.mar100 /= n;
  report.mar1_50 /= n;
  const double hm_sum = report.map50 + report.mar1_50;
  report.f1 = hm_sum > 0.0 ? 2.0 * report.map50 * report.mar1_50 / hm_sum : 0.0;
  return report;
}

}  // namespace

std::vector<double> default_iou_grid() {
  return {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) {
    throw InputError("IOU threshold grid must not be empty");
  }
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double g = iou_thresholds[i];
    if (!(g > 0.0) || g > 1.0) {
      throw InputError("IOU thresholds must lie in (0, 1], got " + std::to_string(g));
    }
    if (i > 0 && g <= iou_thresholds[i - 1]) {
      throw InputError("IOU thresholds must be strictly increasing");
    }
  }
  if (max_detections.empty()) {
    throw InputError("max_detections must not be empty");
  }
  int prev_cap = 0;
  for (int cap : max_detections) {
    if (cap <= prev_cap) {
      throw InputError("max_detections must be strictly increasing positives");
    }
    prev_cap = cap;
  }
  if (recall_points < 2) {
    throw InputError("recall_points must be at least 2");
  }
}

MatchResult match(const std::vector<const Detection*>& detections,
                  const std::vector<const Annotation*>& annotations,
                  double iou_threshold) {
  MatchResult result;
  result.detection_match.assign(detections.size(), std::nullopt);
  result.annotation_matched.assign(annotations.size(), false);
  if (detections.empty() || annotations.empty()) return result;

  const auto assignment =
      greedy_assign(iou_matrix(detections, annotations), annotations.size(), iou_threshold);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (assignment[d] >= 0) {
      result.detection_match[d] = annotations[assignment[d]]->id;
      result.annotation_matched[assignment[d]] = true;
    }
  }
  return result;
}

std::optional<double> precision_at(const std::vector<const Detection*>& detections,
                                   const std::vector<const Annotation*>& annotations,
                                   double iou_threshold) {
  if (detections.empty()) return std::nullopt;
  const MatchResult result = match(detections, annotations, iou_threshold);
  std::size_t matched = 0;
  for (const auto& m : result.detection_match) {
    if (m) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(detections.size());
}

double average_precision(std::vector<PooledDetection> pooled, std::size_t gt_count,
                         int recall_points) {
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const PooledDetection& a, const PooledDetection& b) {
                     return a.score > b.score;
                   });
  const std::size_t n = pooled.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pooled[i].true_positive) {
      ++tp;
    } else {
      ++fp;
    }
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  double sum = 0.0;
  for (int j = 0; j < recall_points; ++j) {
    const double r = static_cast<double>(j) / static_cast<double>(recall_points - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) {
      sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return sum / static_cast<double>(recall_points);
}

MetricsReport evaluate(const DetectionSet& detections, const Dataset& gts,
                       const EvalConfig& cfg) {
  std::vector<std::int64_t> ids;
  ids.reserve(gts.images().size());
  for (const ImageInfo& im : gts.images()) ids.push_back(im.id);
  std::sort(ids.begin(), ids.end());

  std::vector<std::pair<std::int64_t, std::vector<const Annotation*>>> gt_images;
  gt_images.reserve(ids.size());
  for (std::int64_t id : ids) gt_images.emplace_back(id, gts.annotations_of(id));
  return evaluate_core(detections, gts, gt_images, cfg);
}

MetricsReport evaluate_subset(const DetectionSet& detections, const Dataset& ds,
                              const std::map<std::int64_t, std::set<std::int64_t>>& keep_by_image,
                              const EvalConfig& cfg) {
  std::vector<std::pair<std::int64_t, std::vector<const Annotation*>>> gt_images;
  gt_images.reserve(keep_by_image.size());
  for (const auto& [image_id, keep] : keep_by_image) {
    if (!ds.has_image(image_id)) {
      throw InputError("subset references unknown image id " + std::to_string(image_id));
    }
    std::vector<const Annotation*> kept;
    const auto anns = ds.annotations_of(image_id);
    std::size_t found = 0;
    for (const Annotation* a : anns) {
      if (keep.count(a->id)) {
        kept.push_back(a);
        ++found;
      }
    }
    if (found != keep.size()) {
      throw InputError("subset for image " + std::to_string(image_id) +
                       " references annotation ids not in the dataset");
    }
    gt_images.emplace_back(image_id, std::move(kept));
  }
  return evaluate_core(detections, ds, gt_images, cfg);
}

namespace {

// Per-image keep sets from importance records; complement=true keeps the
// annotations at or below the threshold instead.
std::map<std::int64_t, std::set<std::int64_t>> keep_sets(
    const Dataset& ds, const std::vector<ImportanceRecord>& records, double threshold,
    bool complement, std::size_t* images_skipped) {
  std::map<std::int64_t, std::set<std::int64_t>> keep;
  std::set<std::int64_t> covered;
  *images_skipped = 0;
  for (const ImportanceRecord& rec : records) {
    covered.insert(rec.image_id);
    if (rec.skipped) {
      (*images_skipped)++;
      continue;
    }
    std::set<std::int64_t> ids;
    for (const ImportanceEntry& e : rec.entries) {
      const bool selected = e.propagated_score > threshold;
      if (selected != complement) ids.insert(e.annotation_id);
    }
    keep[rec.image_id] = std::move(ids);
  }

  std::vector<std::int64_t> uncovered;
  for (std::int64_t id : ds.annotated_image_ids()) {
    if (!covered.count(id)) uncovered.push_back(id);
  }
  if (!uncovered.empty()) {
    std::ostringstream os;
    os << "importance records do not cover " << uncovered.size()
       << " annotated image(s); first missing id " << uncovered.front();
    throw InputError(os.str());
  }
  if (keep.empty()) {
    throw InputError("no evaluable images (all images skipped)");
  }
  return keep;
}

}  // namespace

MetricsReport evaluate_filtered(const DetectionSet& detections, const Dataset& ds,
                                const std::vector<ImportanceRecord>& records,
                                double threshold, const EvalConfig& cfg) {
  std::size_t images_skipped = 0;
  const auto keep = keep_sets(ds, records, threshold, false, &images_skipped);
  MetricsReport report = evaluate_subset(detections, ds, keep, cfg);
  report.images_skipped = images_skipped;
  report.annotations_removed = ds.annotations().size() - report.gt_used;
  return report;
}

MetricsReport evaluate_complement(const DetectionSet& detections, const Dataset& ds,
                                  const std::vector<ImportanceRecord>& records,
                                  double threshold, const EvalConfig& cfg) {
  std::size_t images_skipped = 0;
  const auto keep = keep_sets(ds, records, threshold, true, &images_skipped);
  MetricsReport report = evaluate_subset(detections, ds, keep, cfg);
  report.images_skipped = images_skipped;
  report.annotations_removed = ds.annotations().size() - report.gt_used;
  return report;
}

DetectionSet cap_detections(const DetectionSet& detections, int per_image_cap) {
  if (per_image_cap <= 0) return detections;
  DetectionSet capped;
  capped.stats = detections.stats;
  for (const auto& [image_id, dets] : detections.by_image) {
    const std::size_t take =
        std::min<std::size_t>(dets.size(), static_cast<std::size_t>(per_image_cap));
    capped.by_image[image_id] = std::vector<Detection>(dets.begin(), dets.begin() + take);
    capped.total += take;
  }
  return capped;
}

nlohmann::json report_to_json(const MetricsReport& report, const EvalConfig& cfg) {
  json metrics = {{"map", report.map},         {"map50", report.map50},
                  {"map75", report.map75},     {"mar1", report.mar1},
                  {"mar10", report.mar10},     {"mar100", report.mar100},
                  {"mar1_50", report.mar1_50}, {"f1", report.f1}};
  json per_category = json::array();
  for (const CategoryMetrics& cm : report.per_category) {
    per_category.push_back({{"id", cm.category_id},
                            {"name", cm.name},
                            {"ap", cm.ap},
                            {"ap50", cm.ap50},
                            {"ap75", cm.ap75},
                            {"ar1", cm.ar1},
                            {"ar10", cm.ar10},
                            {"ar100", cm.ar100},
                            {"ar1_50", cm.ar1_50},
                            {"gt_count", cm.gt_count}});
  }
  json totals = {{"gt_used", report.gt_used},
                 {"detections_used", report.detections_used},
                 {"images_evaluated", report.images_evaluated},
                 {"images_skipped", report.images_skipped},
                 {"annotations_removed", report.annotations_removed},
                 {"categories_excluded", report.categories_excluded}};
  // The parallelism degree is deliberately absent: outputs must be
  // byte-identical for any --jobs value.
  json config = {{"iou_thresholds", cfg.iou_thresholds},
                 {"max_detections", cfg.max_detections},
                 {"recall_points", cfg.recall_points}};
  return json{{"config", std::move(config)},
              {"totals", std::move(totals)},
              {"metrics", std::move(metrics)},
              {"per_category", std::move(per_category)}};
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  const auto row = [&](const char* name, double value) {
    os << "  " << name;
    for (std::size_t i = std::char_traits<char>::length(name); i < 10; ++i) os << ' ';
    os << value << "\n";
  };
  row("mAP", report.map);
  row("mAP50", report.map50);
  row("mAP75", report.map75);
  row("mAR1", report.mar1);
  row("mAR10", report.mar10);
  row("mAR100", report.mar100);
  row("mAR1_50", report.mar1_50);
  row("F1", report.f1);
  os << "  (categories " << report.per_category.size() << " scored, "
     << report.categories_excluded << " excluded; gt " << report.gt_used << "; detections "
     << report.detections_used << "; images " << report.images_evaluated;
  if (report.images_skipped) os << ", " << report.images_skipped << " skipped";
  os << ")\n";
  return os.str();
}

}  // namespace critsel
