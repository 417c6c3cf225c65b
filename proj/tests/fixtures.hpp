#ifndef CRITSEL_TESTS_FIXTURES_HPP
#define CRITSEL_TESTS_FIXTURES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "critsel/coco_io.hpp"
#include "critsel/dataset.hpp"
#include "critsel/importance.hpp"
#include "critsel/semantics.hpp"

namespace critsel_tests {

// Scratch files live under the test working directory.
std::string scratch_path(const std::string& name);
std::string write_scratch(const std::string& name, const std::string& content);
std::string write_scratch_json(const std::string& name, const nlohmann::json& doc);

// Round-trips the document through the real parser.
critsel::Dataset dataset_from_json(const nlohmann::json& doc, bool strict = false);

// Assembles a dataset document from plain rows.
struct AnnRow {
  std::int64_t id, image_id, category_id;
  double x, y, w, h;
};
nlohmann::json coco_doc(const std::vector<std::pair<std::int64_t, std::string>>& categories,
                        const std::vector<std::int64_t>& image_ids,
                        const std::vector<AnnRow>& annotations);

nlohmann::json captions_doc(
    const std::vector<std::pair<std::int64_t, std::string>>& caption_rows);

struct DetRow {
  std::int64_t image_id, category_id;
  double x, y, w, h;
  double score;
};
// Detection set with the loader's ordering contract applied.
critsel::DetectionSet detection_set(const std::vector<DetRow>& rows);
nlohmann::json detections_doc(const std::vector<DetRow>& rows);

// Scene mirroring the running example: a tennis racket touching a player
// box, two far-away pieces of furniture, and racket-dominant captions.
struct RacketScene {
  critsel::Dataset dataset;
  critsel::ConceptMap concept_map;
  std::int64_t image_id = 1;
  std::int64_t player_id = 1;
  std::int64_t racket_id = 2;
  std::int64_t chair_id = 3;
  std::int64_t umbrella_id = 4;
};
RacketScene make_racket_scene();

// Rank-flip fixture: one critical annotation, five superfluous ones, a
// detector that only finds the critical object, and one that only finds
// the superfluous ones.
struct FlipScene {
  critsel::Dataset dataset;
  std::vector<critsel::ImportanceRecord> records;
  critsel::DetectionSet critical_detector;
  critsel::DetectionSet superfluous_detector;
  double threshold = 0.3;
};
FlipScene make_flip_scene();

// Two datasets over one shared image: A holds two adjacent core boxes; B
// holds the same cores plus three detached noise boxes whose importance
// drops them one per sweep step.
struct ConsistencyScene {
  critsel::Dataset dataset_a;
  critsel::Dataset dataset_b;
  std::vector<critsel::ImportanceRecord> records_a;
  std::vector<critsel::ImportanceRecord> records_b;
  double fixed_threshold_a = 0.25;
};
ConsistencyScene make_consistency_scene();

}  // namespace critsel_tests

#endif  // CRITSEL_TESTS_FIXTURES_HPP
