#include "critsel/bbox.hpp"

#include <algorithm>
#include <cmath>

namespace critsel {

bool is_valid(const BBox& b) {
  return b.w > 0.0 && b.h > 0.0 && std::isfinite(b.x) && std::isfinite(b.y) &&
         std::isfinite(b.w) && std::isfinite(b.h);
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  // Areas from the same corner arithmetic as the intersection, so
  // iou(a, a) is exactly 1 even for fractional coordinates.
  const double area_a = (a.right() - a.left()) * (a.bottom() - a.top());
  const double area_b = (b.right() - b.left()) * (b.bottom() - b.top());
  return inter / (area_a + area_b - inter);
}

double min_distance(const BBox& a, const BBox& b) {
  const double dx = std::max({0.0, b.left() - a.right(), a.left() - b.right()});
  const double dy = std::max({0.0, b.top() - a.bottom(), a.top() - b.bottom()});
  return std::hypot(dx, dy);
}

double union_area(std::span<const BBox> boxes) {
  if (boxes.empty()) return 0.0;

  std::vector<double> xs;
  xs.reserve(boxes.size() * 2);
  for (const BBox& b : boxes) {
    xs.push_back(b.left());
    xs.push_back(b.right());
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double total = 0.0;
  std::vector<std::pair<double, double>> intervals;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double x0 = xs[i];
    const double x1 = xs[i + 1];
    intervals.clear();
    for (const BBox& b : boxes) {
      if (b.left() <= x0 && b.right() >= x1) {
        intervals.emplace_back(b.top(), b.bottom());
      }
    }
    if (intervals.empty()) continue;
    std::sort(intervals.begin(), intervals.end());

    // Merged y coverage within this x-slab.
    double covered = 0.0;
    double lo = intervals[0].first;
    double hi = intervals[0].second;
    for (std::size_t k = 1; k < intervals.size(); ++k) {
      if (intervals[k].first > hi) {
        covered += hi - lo;
        lo = intervals[k].first;
        hi = intervals[k].second;
      } else {
        hi = std::max(hi, intervals[k].second);
      }
    }
    covered += hi - lo;
    total += covered * (x1 - x0);
  }
  return total;
}

double union_area(const std::vector<BBox>& boxes) {
  return union_area(std::span<const BBox>(boxes.data(), boxes.size()));
}

}  // namespace critsel
