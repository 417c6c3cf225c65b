#ifndef CRITSEL_DATASET_HPP
#define CRITSEL_DATASET_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "critsel/bbox.hpp"

namespace critsel {

struct Category {
  std::int64_t id = 0;
  std::string name;  // lowercase
};

// Category vocabulary: ids unique, names unique after lowercasing.
class Vocabulary {
 public:
  void add(Category cat);

  const std::vector<Category>& categories() const { return cats_; }
  bool has_id(std::int64_t id) const { return by_id_.count(id) != 0; }
  const Category* find_id(std::int64_t id) const;
  const Category* find_name(const std::string& lowercase_name) const;
  std::size_t size() const { return cats_.size(); }

 private:
  std::vector<Category> cats_;
  std::unordered_map<std::int64_t, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

struct ImageInfo {
  std::int64_t id = 0;
  double width = 0.0;
  double height = 0.0;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox bbox;
};

struct Detection {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox bbox;
  double score = 0.0;  // in [0, 1]
};

// The ground-truth sentences grounding one image's semantics. When a
// caption record carries a "tokens" array (output of an external tagger),
// those lemma tokens ride along here and replace the built-in normalizer
// for that caption; an empty inner list means "not pre-tagged".
struct CaptionSet {
  std::int64_t image_id = 0;
  std::vector<std::string> captions;
  std::vector<std::vector<std::string>> pre_tagged;  // parallel to captions
};

struct LoadStats {
  int skipped_degenerate = 0;
  int skipped_unknown_category = 0;
};

// Immutable after load; safe to share across threads.
class Dataset {
 public:
  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<ImageInfo>& images() const { return images_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }
  const LoadStats& load_stats() const { return stats_; }

  bool has_image(std::int64_t image_id) const;
  const ImageInfo* find_image(std::int64_t image_id) const;

  // Annotations of one image, ordered by annotation id.
  std::vector<const Annotation*> annotations_of(std::int64_t image_id) const;
  const Annotation* find_annotation(std::int64_t annotation_id) const;

  // Image ids that carry at least one annotation, ascending.
  std::vector<std::int64_t> annotated_image_ids() const;

  void attach_captions(std::map<std::int64_t, CaptionSet> captions);
  const CaptionSet* captions_of(std::int64_t image_id) const;
  const std::map<std::int64_t, CaptionSet>& captions() const { return captions_; }

 private:
  friend class CocoIo;

  Vocabulary vocab_;
  std::vector<ImageInfo> images_;
  std::vector<Annotation> annotations_;
  std::map<std::int64_t, CaptionSet> captions_;
  LoadStats stats_;

  std::unordered_map<std::int64_t, std::size_t> image_index_;
  std::unordered_map<std::int64_t, std::size_t> annotation_index_;
  // Per-image annotation indices, ordered by annotation id.
  std::map<std::int64_t, std::vector<std::size_t>> by_image_;

  // Verbatim source document so filtered output preserves the images,
  // categories, and info/licenses sections along with per-annotation
  // extra fields untouched.
  std::shared_ptr<const nlohmann::json> source_doc_;
};

}  // namespace critsel

#endif  // CRITSEL_DATASET_HPP
