#ifndef CRITSEL_COCO_IO_HPP
#define CRITSEL_COCO_IO_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "critsel/dataset.hpp"

namespace critsel {

struct LoadOptions {
  // Degenerate boxes and unresolvable category ids are skipped with a
  // warning by default; strict upgrades them to hard errors.
  bool strict = false;
};

// Reads a COCO-style annotation file (images, annotations, categories;
// bbox as [x, y, w, h]). Throws InputError on malformed JSON, missing
// keys, or annotations referencing unknown images/categories.
Dataset load_annotations(const std::string& path, const LoadOptions& opts = {});

// Reads a COCO captions file; captions grouped by image id. Text is kept
// verbatim; the semantics module owns all filtering.
std::map<std::int64_t, CaptionSet> load_captions(const std::string& path);

struct DetectionSet {
  // Per image, sorted by score descending; ties keep input file order.
  std::map<std::int64_t, std::vector<Detection>> by_image;
  LoadStats stats;
  std::size_t total = 0;
};

// Reads a COCO detection-results file (list of {image_id, category_id,
// bbox, score}). Scores outside [0, 1] are a validation error naming the
// record; unknown category ids follow the LoadOptions policy.
DetectionSet load_detections(const std::string& path, const Vocabulary& vocab,
                             const LoadOptions& opts = {});

// Emits a COCO annotation file containing only the kept annotation ids,
// with the images and categories sections preserved unchanged. Throws
// InputError when keep contains ids absent from the dataset.
void write_filtered_annotations(const Dataset& ds,
                                const std::set<std::int64_t>& keep,
                                const std::string& path);

}  // namespace critsel

#endif  // CRITSEL_COCO_IO_HPP
