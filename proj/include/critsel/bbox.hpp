#ifndef CRITSEL_BBOX_HPP
#define CRITSEL_BBOX_HPP

#include <span>
#include <vector>

namespace critsel {

// Axis-aligned box in pixel units, stored in the COCO wire layout
// (left, top, width, height). Coordinates may be fractional.
// Valid boxes have w > 0 and h > 0; loaders enforce this.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return x; }
  double top() const { return y; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  bool operator==(const BBox&) const = default;
};

inline double area(const BBox& b) { return b.w * b.h; }

bool is_valid(const BBox& b);

// Jaccard index of the two boxes' areas, in [0, 1].
double iou(const BBox& a, const BBox& b);

// Euclidean distance between the closest pair of points of the two
// rectangles; 0 when they overlap or touch.
double min_distance(const BBox& a, const BBox& b);

// Exact area of the geometric union (overlaps counted once), via a sweep
// over the distinct x-edges with y-interval merging per slab.
double union_area(std::span<const BBox> boxes);
double union_area(const std::vector<BBox>& boxes);

}  // namespace critsel

#endif  // CRITSEL_BBOX_HPP
