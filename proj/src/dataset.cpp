#include "critsel/dataset.hpp"

#include <algorithm>

#include "critsel/errors.hpp"

namespace critsel {

void Vocabulary::add(Category cat) {
  std::transform(cat.name.begin(), cat.name.end(), cat.name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (by_id_.count(cat.id)) {
    throw InputError("duplicate category id " + std::to_string(cat.id));
  }
  if (by_name_.count(cat.name)) {
    throw InputError("duplicate category name \"" + cat.name + "\" after lowercasing");
  }
  by_id_[cat.id] = cats_.size();
  by_name_[cat.name] = cats_.size();
  cats_.push_back(std::move(cat));
}

const Category* Vocabulary::find_id(std::int64_t id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &cats_[it->second];
}

const Category* Vocabulary::find_name(const std::string& lowercase_name) const {
  auto it = by_name_.find(lowercase_name);
  return it == by_name_.end() ? nullptr : &cats_[it->second];
}

bool Dataset::has_image(std::int64_t image_id) const {
  return image_index_.count(image_id) != 0;
}

const ImageInfo* Dataset::find_image(std::int64_t image_id) const {
  auto it = image_index_.find(image_id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

std::vector<const Annotation*> Dataset::annotations_of(std::int64_t image_id) const {
  std::vector<const Annotation*> out;
  auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t idx : it->second) out.push_back(&annotations_[idx]);
  return out;
}

const Annotation* Dataset::find_annotation(std::int64_t annotation_id) const {
  auto it = annotation_index_.find(annotation_id);
  return it == annotation_index_.end() ? nullptr : &annotations_[it->second];
}

std::vector<std::int64_t> Dataset::annotated_image_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(by_image_.size());
  for (const auto& [image_id, idxs] : by_image_) {
    if (!idxs.empty()) ids.push_back(image_id);
  }
  return ids;
}

void Dataset::attach_captions(std::map<std::int64_t, CaptionSet> captions) {
  captions_ = std::move(captions);
}

const CaptionSet* Dataset::captions_of(std::int64_t image_id) const {
  auto it = captions_.find(image_id);
  return it == captions_.end() ? nullptr : &it->second;
}

}  // namespace critsel
