#include "critsel/coco_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "critsel/errors.hpp"
#include "critsel/log.hpp"

namespace critsel {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
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
  return doc;
}

const json& require_key(const json& doc, const char* key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw InputError(path + ": missing required key \"" + std::string(key) + "\"");
  }
  return doc.at(key);
}

const json& require_array(const json& doc, const char* key, const std::string& path) {
  const json& value = require_key(doc, key, path);
  if (!value.is_array()) {
    throw InputError(path + ": \"" + std::string(key) + "\" must be an array");
  }
  return value;
}

BBox parse_bbox(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw InputError(where + ": bbox must be [x, y, width, height]");
  }
  BBox b;
  b.x = j[0].get<double>();
  b.y = j[1].get<double>();
  b.w = j[2].get<double>();
  b.h = j[3].get<double>();
  return b;
}

std::string join_ids(const std::vector<std::int64_t>& ids, std::size_t limit = 10) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) os << ", ";
    os << ids[i];
  }
  if (ids.size() > limit) os << ", ... (" << ids.size() << " total)";
  return os.str();
}

}  // namespace

// Builder with access to Dataset internals.
class CocoIo {
 public:
  static Dataset load(const std::string& path, const LoadOptions& opts) {
    auto doc = std::make_shared<const json>(parse_file(path));
    const json& images = require_array(*doc, "images", path);
    const json& annotations = require_array(*doc, "annotations", path);
    const json& categories = require_array(*doc, "categories", path);

    Dataset ds;
    ds.source_doc_ = doc;

    for (const json& c : categories) {
      Category cat;
      cat.id = require_key(c, "id", path).get<std::int64_t>();
      cat.name = require_key(c, "name", path).get<std::string>();
      ds.vocab_.add(std::move(cat));
    }

    for (const json& im : images) {
      ImageInfo info;
      info.id = require_key(im, "id", path).get<std::int64_t>();
      if (im.contains("width")) info.width = im.at("width").get<double>();
      if (im.contains("height")) info.height = im.at("height").get<double>();
      if (ds.image_index_.count(info.id)) {
        throw InputError(path + ": duplicate image id " + std::to_string(info.id));
      }
      ds.image_index_[info.id] = ds.images_.size();
      ds.images_.push_back(info);
    }

    std::vector<std::int64_t> bad_image_refs;
    std::vector<std::int64_t> bad_category_refs;
    for (const json& a : annotations) {
      Annotation ann;
      ann.id = require_key(a, "id", path).get<std::int64_t>();
      ann.image_id = require_key(a, "image_id", path).get<std::int64_t>();
      ann.category_id = require_key(a, "category_id", path).get<std::int64_t>();
      ann.bbox = parse_bbox(require_key(a, "bbox", path),
                            path + ": annotation " + std::to_string(ann.id));

      if (!ds.image_index_.count(ann.image_id)) {
        bad_image_refs.push_back(ann.id);
        continue;
      }
      if (!ds.vocab_.has_id(ann.category_id)) {
        bad_category_refs.push_back(ann.id);
        continue;
      }
      if (!is_valid(ann.bbox)) {
        if (opts.strict) {
          throw InputError(path + ": annotation " + std::to_string(ann.id) +
                           " has a degenerate bbox (w or h <= 0)");
        }
        ds.stats_.skipped_degenerate++;
        log::warn(path + ": skipping annotation " + std::to_string(ann.id) +
                  " with degenerate bbox");
        continue;
      }
      if (ds.annotation_index_.count(ann.id)) {
        throw InputError(path + ": duplicate annotation id " + std::to_string(ann.id));
      }
      ds.annotation_index_[ann.id] = ds.annotations_.size();
      ds.annotations_.push_back(ann);
    }
    if (!bad_image_refs.empty()) {
      throw InputError(path + ": annotations referencing unknown images: ids " +
                       join_ids(bad_image_refs));
    }
    if (!bad_category_refs.empty()) {
      throw InputError(path + ": annotations referencing unknown categories: ids " +
                       join_ids(bad_category_refs));
    }

    for (std::size_t i = 0; i < ds.annotations_.size(); ++i) {
      ds.by_image_[ds.annotations_[i].image_id].push_back(i);
    }
    for (auto& [image_id, idxs] : ds.by_image_) {
      std::sort(idxs.begin(), idxs.end(), [&](std::size_t l, std::size_t r) {
        return ds.annotations_[l].id < ds.annotations_[r].id;
      });
    }
    return ds;
  }

  static void write_filtered(const Dataset& ds, const std::set<std::int64_t>& keep,
                             const std::string& path) {
    std::vector<std::int64_t> foreign;
    for (std::int64_t id : keep) {
      if (!ds.annotation_index_.count(id)) foreign.push_back(id);
    }
    if (!foreign.empty()) {
      throw InputError(path + ": keep set contains unknown annotation ids: " +
                       join_ids(foreign));
    }

    json out = json::object();
    if (ds.source_doc_) {
      // Pass all non-annotation sections through verbatim.
      for (auto it = ds.source_doc_->begin(); it != ds.source_doc_->end(); ++it) {
        if (it.key() != "annotations") out[it.key()] = it.value();
      }
    } else {
      out["images"] = json::array();
      for (const ImageInfo& im : ds.images_) {
        out["images"].push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
      }
      out["categories"] = json::array();
      for (const Category& c : ds.vocab_.categories()) {
        out["categories"].push_back({{"id", c.id}, {"name", c.name}});
      }
    }

    json anns = json::array();
    if (ds.source_doc_ && ds.source_doc_->contains("annotations")) {
      for (const json& a : ds.source_doc_->at("annotations")) {
        if (!a.contains("id")) continue;
        if (keep.count(a.at("id").get<std::int64_t>())) anns.push_back(a);
      }
    } else {
      for (const Annotation& a : ds.annotations_) {
        if (!keep.count(a.id)) continue;
        anns.push_back({{"id", a.id},
                        {"image_id", a.image_id},
                        {"category_id", a.category_id},
                        {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}}});
      }
    }
    out["annotations"] = std::move(anns);

    std::ofstream os(path);
    if (!os.good()) {
      throw InputError(path + ": cannot open file for writing");
    }
    os << out.dump() << "\n";
    if (!os.good()) {
      throw InputError(path + ": write failed");
    }
  }
};

Dataset load_annotations(const std::string& path, const LoadOptions& opts) {
  try {
    return CocoIo::load(path, opts);
  } catch (const json::exception& e) {
    throw InputError(path + ": invalid value type (" + e.what() + ")");
  }
}

std::map<std::int64_t, CaptionSet> load_captions(const std::string& path) {
  const json doc = parse_file(path);
  const json& annotations = require_array(doc, "annotations", path);

  std::map<std::int64_t, CaptionSet> out;
  try {
    for (const json& a : annotations) {
      const std::int64_t image_id = require_key(a, "image_id", path).get<std::int64_t>();
      const std::string text = require_key(a, "caption", path).get<std::string>();
      CaptionSet& set = out[image_id];
      set.image_id = image_id;
      set.captions.push_back(text);
      std::vector<std::string> tokens;
      if (a.contains("tokens") && a.at("tokens").is_array()) {
        for (const json& t : a.at("tokens")) tokens.push_back(t.get<std::string>());
      }
      set.pre_tagged.push_back(std::move(tokens));
    }
  } catch (const json::exception& e) {
    throw InputError(path + ": invalid value type (" + e.what() + ")");
  }
  return out;
}

DetectionSet load_detections(const std::string& path, const Vocabulary& vocab,
                             const LoadOptions& opts) {
  const json doc = parse_file(path);
  if (!doc.is_array()) {
    throw InputError(path + ": detection results must be a JSON array");
  }

  DetectionSet out;
  std::size_t record = 0;
  for (const json& d : doc) {
    const std::string where = path + ": record " + std::to_string(record);
    ++record;

    Detection det;
    try {
      det.image_id = require_key(d, "image_id", path).get<std::int64_t>();
      det.category_id = require_key(d, "category_id", path).get<std::int64_t>();
      det.bbox = parse_bbox(require_key(d, "bbox", path), where);
      det.score = require_key(d, "score", path).get<double>();
    } catch (const json::exception& e) {
      throw InputError(where + ": invalid value type (" + e.what() + ")");
    }

    if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
      throw InputError(where + ": score " + std::to_string(det.score) +
                       " outside [0, 1]");
    }
    if (!vocab.has_id(det.category_id)) {
      if (opts.strict) {
        throw InputError(where + ": unknown category id " +
                         std::to_string(det.category_id));
      }
      out.stats.skipped_unknown_category++;
      log::warn(where + ": skipping detection with unknown category id " +
                std::to_string(det.category_id));
      continue;
    }
    if (!is_valid(det.bbox)) {
      if (opts.strict) {
        throw InputError(where + ": degenerate bbox (w or h <= 0)");
      }
      out.stats.skipped_degenerate++;
      log::warn(where + ": skipping detection with degenerate bbox");
      continue;
    }
    out.by_image[det.image_id].push_back(det);
    out.total++;
  }

  for (auto& [image_id, dets] : out.by_image) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
  }
  return out;
}

void write_filtered_annotations(const Dataset& ds, const std::set<std::int64_t>& keep,
                                const std::string& path) {
  CocoIo::write_filtered(ds, keep, path);
}

}  // namespace critsel
