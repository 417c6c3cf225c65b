#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>

namespace critsel_tests {

using critsel::DetectionSet;
using nlohmann::json;

std::string scratch_path(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::path("critsel_scratch");
  std::filesystem::create_directories(dir);
  return (dir / (std::to_string(counter.fetch_add(1)) + "_" + name)).string();
}

std::string write_scratch(const std::string& name, const std::string& content) {
  const std::string path = scratch_path(name);
  std::ofstream os(path);
  os << content;
  return path;
}

std::string write_scratch_json(const std::string& name, const json& doc) {
  return write_scratch(name, doc.dump());
}

critsel::Dataset dataset_from_json(const json& doc, bool strict) {
  return critsel::load_annotations(write_scratch_json("dataset.json", doc), {strict});
}

json coco_doc(const std::vector<std::pair<std::int64_t, std::string>>& categories,
              const std::vector<std::int64_t>& image_ids,
              const std::vector<AnnRow>& annotations) {
  json doc;
  doc["categories"] = json::array();
  for (const auto& [id, name] : categories) {
    doc["categories"].push_back({{"id", id}, {"name", name}});
  }
  doc["images"] = json::array();
  for (std::int64_t id : image_ids) {
    doc["images"].push_back({{"id", id}, {"width", 640}, {"height", 480}});
  }
  doc["annotations"] = json::array();
  for (const AnnRow& a : annotations) {
    doc["annotations"].push_back({{"id", a.id},
                                  {"image_id", a.image_id},
                                  {"category_id", a.category_id},
                                  {"bbox", {a.x, a.y, a.w, a.h}}});
  }
  return doc;
}

json captions_doc(const std::vector<std::pair<std::int64_t, std::string>>& caption_rows) {
  json doc;
  doc["annotations"] = json::array();
  int id = 1;
  for (const auto& [image_id, text] : caption_rows) {
    doc["annotations"].push_back({{"id", id++}, {"image_id", image_id}, {"caption", text}});
  }
  return doc;
}

DetectionSet detection_set(const std::vector<DetRow>& rows) {
  DetectionSet set;
  for (const DetRow& r : rows) {
    critsel::Detection det;
    det.image_id = r.image_id;
    det.category_id = r.category_id;
    det.bbox = {r.x, r.y, r.w, r.h};
    det.score = r.score;
    set.by_image[r.image_id].push_back(det);
    set.total++;
  }
  for (auto& [id, dets] : set.by_image) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
  }
  return set;
}

json detections_doc(const std::vector<DetRow>& rows) {
  json doc = json::array();
  for (const DetRow& r : rows) {
    doc.push_back({{"image_id", r.image_id},
                   {"category_id", r.category_id},
                   {"bbox", {r.x, r.y, r.w, r.h}},
                   {"score", r.score}});
  }
  return doc;
}

RacketScene make_racket_scene() {
  RacketScene scene;
  scene.dataset = dataset_from_json(
      coco_doc({{1, "person"}, {2, "tennis racket"}, {3, "chair"}, {4, "umbrella"}}, {1},
               {{1, 1, 1, 100, 100, 60, 120},   // player
                {2, 1, 2, 160, 140, 30, 40},    // racket, touching the player box
                {3, 1, 3, 400, 300, 40, 40},    // chair, far corner
                {4, 1, 4, 500, 60, 50, 50}}));  // umbrella, far corner

  std::map<std::int64_t, critsel::CaptionSet> captions;
  captions[1].image_id = 1;
  captions[1].captions = {
      "A player swings a tennis racket.",
      "The tennis racket is swung hard.",
      "A racket in action on the court.",
      "A player holding a racket.",
      "Closeup of a tennis racket.",
  };
  scene.dataset.attach_captions(std::move(captions));

  critsel::ConceptMap cmap = critsel::ConceptMap::identity(scene.dataset.vocabulary());
  cmap.add("racket", 2);
  scene.concept_map = std::move(cmap);
  return scene;
}

FlipScene make_flip_scene() {
  // Category 1 only. Annotation 1 is critical; 2..6 are superfluous and
  // sit far away from it and from each other.
  std::vector<AnnRow> anns = {{1, 1, 1, 0, 0, 10, 10}};
  for (int k = 2; k <= 6; ++k) {
    anns.push_back({k, 1, 1, 1000.0 + 200.0 * k, 100.0 * k, 10, 10});
  }

  FlipScene scene;
  scene.dataset = dataset_from_json(coco_doc({{1, "thing"}}, {1}, anns));

  critsel::ImportanceRecord rec;
  rec.image_id = 1;
  rec.entries = {{1, 0.75, 0.75}, {2, 0.05, 0.05}, {3, 0.05, 0.05},
                 {4, 0.05, 0.05}, {5, 0.05, 0.05}, {6, 0.05, 0.05}};
  scene.records = {rec};

  // Detector 1: one exact hit on the critical box.
  scene.critical_detector = detection_set({{1, 1, 0, 0, 10, 10, 0.9}});
  // Detector 2: exact hits on every superfluous box.
  std::vector<DetRow> superfluous;
  for (int k = 2; k <= 6; ++k) {
    superfluous.push_back({1, 1, 1000.0 + 200.0 * k, 100.0 * k, 10, 10, 0.9});
  }
  scene.superfluous_detector = detection_set(superfluous);
  return scene;
}

ConsistencyScene make_consistency_scene() {
  ConsistencyScene scene;

  // Dataset A: the two adjacent core boxes.
  scene.dataset_a = dataset_from_json(
      coco_doc({{1, "thing"}}, {1}, {{1, 1, 1, 0, 0, 40, 40}, {2, 1, 1, 40, 0, 40, 40}}));
  critsel::ImportanceRecord rec_a;
  rec_a.image_id = 1;
  rec_a.entries = {{1, 0.5, 0.5}, {2, 0.5, 0.5}};
  scene.records_a = {rec_a};

  // Dataset B: same cores plus three detached noise boxes whose scores
  // fall in successive sweep bands.
  scene.dataset_b = dataset_from_json(coco_doc({{1, "thing"}}, {1},
                                               {{101, 1, 1, 0, 0, 40, 40},
                                                {102, 1, 1, 40, 0, 40, 40},
                                                {103, 1, 1, 200, 0, 40, 40},
                                                {104, 1, 1, 300, 0, 40, 40},
                                                {105, 1, 1, 400, 0, 40, 40}}));
  critsel::ImportanceRecord rec_b;
  rec_b.image_id = 1;
  rec_b.entries = {{101, 0.38, 0.38},
                   {102, 0.38, 0.38},
                   {103, 0.12, 0.12},
                   {104, 0.08, 0.08},
                   {105, 0.04, 0.04}};
  scene.records_b = {rec_b};
  return scene;
}

}  // namespace critsel_tests
