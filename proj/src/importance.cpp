#include "critsel/importance.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "critsel/errors.hpp"

namespace critsel {

namespace {

using nlohmann::json;

ImportanceRecord skip_record(std::int64_t image_id, const char* reason) {
  ImportanceRecord rec;
  rec.image_id = image_id;
  rec.skipped = true;
  rec.reason = reason;
  return rec;
}

}  // namespace

Eigen::VectorXd distribute(const TypicalityScores& scores,
                           const std::vector<const Annotation*>& annotations) {
  const Eigen::Index n = static_cast<Eigen::Index>(annotations.size());
  Eigen::VectorXd object_scores = Eigen::VectorXd::Zero(n);

  // Per-category area totals within this image.
  std::map<std::int64_t, double> category_area;
  for (const Annotation* ann : annotations) {
    category_area[ann->category_id] += area(ann->bbox);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const Annotation* ann = annotations[i];
    auto it = scores.per_category.find(ann->category_id);
    if (it == scores.per_category.end()) continue;
    object_scores[i] = area(ann->bbox) * it->second / category_area[ann->category_id];
  }
  return object_scores;
}

ObjectGraph build_graph(const std::vector<const Annotation*>& annotations) {
  const Eigen::Index n = static_cast<Eigen::Index>(annotations.size());
  ObjectGraph graph;
  graph.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = min_distance(annotations[i]->bbox, annotations[j]->bbox);
      const double w = 1.0 / std::max(d, 1.0);
      graph.adjacency(i, j) = w;
      graph.adjacency(j, i) = w;
    }
  }
  return graph;
}

HeatKernel heat_kernel(const ObjectGraph& graph, double time) {
  if (!(time >= 0.0)) {
    throw InputError("heat time must be >= 0, got " + std::to_string(time));
  }
  if (graph.adjacency.rows() != graph.adjacency.cols() || !graph.adjacency.allFinite()) {
    throw InputError("object graph adjacency must be square and finite");
  }
  HeatKernel kernel;
  kernel.time = time;
  kernel.matrix = heat_kernel_matrix(graph.adjacency, time);
  return kernel;
}

std::optional<Eigen::VectorXd> propagate(const Eigen::VectorXd& object_scores,
                                         const HeatKernel& kernel) {
  Eigen::VectorXd diffused = kernel.matrix * object_scores;
  diffused = diffused.cwiseMax(0.0);
  const double total = diffused.sum();
  if (!(total > 0.0)) return std::nullopt;
  return diffused / total;
}

ImportanceRecord score_image(const Dataset& ds, const ConceptMap& cmap,
                             const SelectionConfig& cfg, std::int64_t image_id) {
  const auto annotations = ds.annotations_of(image_id);
  if (annotations.empty()) {
    return skip_record(image_id, kSkipNoAnnotations);
  }
  const CaptionSet* captions = ds.captions_of(image_id);
  if (!captions || captions->captions.empty()) {
    return skip_record(image_id, kSkipNoCategoryImportance);
  }

  const TypicalityScores scores = typicality(*captions, cmap);
  if (scores.per_category.empty()) {
    return skip_record(image_id, kSkipNoCategoryImportance);
  }

  const Eigen::VectorXd object_scores = distribute(scores, annotations);
  if (!(object_scores.sum() > 0.0)) {
    return skip_record(image_id, kSkipNoCategoryImportance);
  }

  const HeatKernel kernel = heat_kernel(build_graph(annotations), cfg.heat_time);
  const auto propagated = propagate(object_scores, kernel);
  if (!propagated) {
    return skip_record(image_id, kSkipNoCategoryImportance);
  }

  ImportanceRecord rec;
  rec.image_id = image_id;
  rec.entries.reserve(annotations.size());
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    ImportanceEntry entry;
    entry.annotation_id = annotations[i]->id;
    entry.object_score = object_scores[static_cast<Eigen::Index>(i)];
    entry.propagated_score = (*propagated)[static_cast<Eigen::Index>(i)];
    rec.entries.push_back(entry);
  }
  // annotations_of returns ids ascending, so entries are already ordered.
  return rec;
}

std::vector<ImportanceRecord> score_dataset(const Dataset& ds, const ConceptMap& cmap,
                                            const SelectionConfig& cfg, int jobs) {
  std::vector<std::int64_t> image_ids;
  image_ids.reserve(ds.images().size());
  for (const ImageInfo& im : ds.images()) image_ids.push_back(im.id);
  std::sort(image_ids.begin(), image_ids.end());

  std::vector<ImportanceRecord> records(image_ids.size());
  const int workers = std::max(1, jobs);
  if (workers == 1 || image_ids.size() < 2) {
    for (std::size_t i = 0; i < image_ids.size(); ++i) {
      records[i] = score_image(ds, cmap, cfg, image_ids[i]);
    }
    return records;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&]() {
    try {
      for (std::size_t i = next.fetch_add(1); i < image_ids.size(); i = next.fetch_add(1)) {
        records[i] = score_image(ds, cmap, cfg, image_ids[i]);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min<int>(workers, static_cast<int>(image_ids.size()));
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(run);
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::set<std::int64_t> select(const ImportanceRecord& record, double threshold) {
  std::set<std::int64_t> selected;
  if (record.skipped) return selected;
  for (const ImportanceEntry& entry : record.entries) {
    if (entry.propagated_score > threshold) selected.insert(entry.annotation_id);
  }
  return selected;
}

void write_importance(const std::vector<ImportanceRecord>& records,
                      const std::string& path) {
  json out = json::array();
  for (const ImportanceRecord& rec : records) {
    json r = json::object();
    r["image_id"] = rec.image_id;
    r["skipped"] = rec.skipped;
    if (rec.skipped) r["reason"] = rec.reason;
    json scores = json::array();
    for (const ImportanceEntry& entry : rec.entries) {
      scores.push_back({{"annotation_id", entry.annotation_id},
                        {"i_o", entry.object_score},
                        {"i_p", entry.propagated_score}});
    }
    r["scores"] = std::move(scores);
    out.push_back(std::move(r));
  }

  std::ofstream os(path);
  if (!os.good()) {
    throw InputError(path + ": cannot open file for writing");
  }
  os << out.dump() << "\n";
  if (!os.good()) {
    throw InputError(path + ": write failed");
  }
}

std::vector<ImportanceRecord> load_importance(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) {
    throw InputError(path + ": cannot open file");
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON (" + e.what() + ")");
  }
  if (!doc.is_array()) {
    throw InputError(path + ": importance file must be a JSON array of records");
  }

  std::vector<ImportanceRecord> records;
  records.reserve(doc.size());
  try {
    for (const json& r : doc) {
      if (!r.is_object() || !r.contains("image_id") || !r.contains("skipped")) {
        throw InputError(path + ": record missing image_id or skipped flag");
      }
      ImportanceRecord rec;
      rec.image_id = r.at("image_id").get<std::int64_t>();
      rec.skipped = r.at("skipped").get<bool>();
      if (rec.skipped) {
        rec.reason = r.value("reason", std::string());
        if (rec.reason != kSkipNoCategoryImportance && rec.reason != kSkipNoAnnotations) {
          throw InputError(path + ": image " + std::to_string(rec.image_id) +
                           " skipped with unknown reason \"" + rec.reason + "\"");
        }
      } else {
        if (!r.contains("scores") || r.at("scores").empty()) {
          throw InputError(path + ": non-skipped image " + std::to_string(rec.image_id) +
                           " has no scores");
        }
        for (const json& s : r.at("scores")) {
          ImportanceEntry entry;
          entry.annotation_id = s.at("annotation_id").get<std::int64_t>();
          entry.object_score = s.at("i_o").get<double>();
          entry.propagated_score = s.at("i_p").get<double>();
          rec.entries.push_back(entry);
        }
      }
      records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw InputError(path + ": invalid value type (" + e.what() + ")");
  }
  return records;
}

std::size_t selected_count(const std::vector<ImportanceRecord>& records,
                           double threshold) {
  std::size_t kept = 0;
  for (const ImportanceRecord& rec : records) {
    if (rec.skipped) continue;
    for (const ImportanceEntry& entry : rec.entries) {
      if (entry.propagated_score > threshold) ++kept;
    }
  }
  return kept;
}

double removal_fraction(const std::vector<ImportanceRecord>& records, double threshold,
                        std::size_t total_annotations) {
  if (total_annotations == 0) return 0.0;
  const std::size_t kept = selected_count(records, threshold);
  return 1.0 - static_cast<double>(kept) / static_cast<double>(total_annotations);
}

}  // namespace critsel
