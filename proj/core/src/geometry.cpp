#include "recd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace recd {

BBox::BBox(double left, double top, double right, double bottom)
    : left_(left), top_(top), right_(right), bottom_(bottom) {
  if (!std::isfinite(left) || !std::isfinite(top) || !std::isfinite(right) ||
      !std::isfinite(bottom)) {
    throw InvalidBox("box coordinates must be finite");
  }
  if (!(left < right) || !(top < bottom)) {
    throw InvalidBox("degenerate box " + to_string(*this));
  }
}

BBox BBox::translated(double dx, double dy) const {
  return {left_ + dx, top_ + dy, right_ + dx, bottom_ + dy};
}

std::string to_string(const BBox& box) {
  std::ostringstream out;
  out << '(' << box.left() << ", " << box.top() << ", " << box.right() << ", "
      << box.bottom() << ')';
  return out.str();
}

namespace {

double intersection(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

}  // namespace

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection(a, b);
  if (inter <= 0.0) return 0.0;
  if (a == b) return 1.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double intersection_over_area(const BBox& box, const BBox& region) noexcept {
  return std::clamp(intersection(box, region) / box.area(), 0.0, 1.0);
}

std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return boxes[i].score > boxes[j].score;
  });

  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i].box, boxes[j].box) > iou_threshold) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

MatchResult greedy_match(std::span<const BBox> a, std::span<const BBox> b,
                         double iou_threshold) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0) {
    throw std::invalid_argument("matching threshold must lie in (0, 1]");
  }
  std::vector<MatchPair> candidates;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double v = iou(a[i], b[j]);
      if (v >= iou_threshold) candidates.push_back({i, j, v});
    }
  }
  // Candidates are generated in (a, b) lexicographic order, so a stable sort
  // on IoU alone realizes the (lower a, lower b) tie-break.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MatchPair& x, const MatchPair& y) { return x.iou > y.iou; });

  MatchResult result;
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  for (const auto& c : candidates) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = true;
    used_b[c.b] = true;
    result.pairs.push_back(c);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!used_a[i]) result.unmatched_a.push_back(i);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!used_b[j]) result.unmatched_b.push_back(j);
  }
  return result;
}

std::string_view to_string(MatchStatus status) noexcept {
  switch (status) {
    case MatchStatus::Matched:
      return "matched";
    case MatchStatus::Misfitting:
      return "misfitting";
    case MatchStatus::Overlooked:
      return "overlooked";
  }
  return "unknown";
}

std::vector<MatchStatus> classify_errors(std::span<const BBox> validated,
                                         std::span<const BBox> reference) {
  std::vector<MatchStatus> status(validated.size(), MatchStatus::Overlooked);
  const MatchResult match = greedy_match(validated, reference, kMatchIou);
  for (const auto& p : match.pairs) status[p.a] = MatchStatus::Matched;
  for (std::size_t i : match.unmatched_a) {
    const bool touches = std::any_of(reference.begin(), reference.end(),
                                     [&](const BBox& g) { return iou(validated[i], g) > 0.0; });
    status[i] = touches ? MatchStatus::Misfitting : MatchStatus::Overlooked;
  }
  return status;
}

bool passes_filter(const BBox& box, std::span<const BBox> dontcare,
                   const BoxFilter& filter) noexcept {
  if (box.height() < filter.min_height) return false;
  for (const auto& region : dontcare) {
    const double overlap = filter.dontcare_rule == DontCareRule::Iou
                               ? iou(box, region)
                               : intersection_over_area(box, region);
    if (overlap >= filter.dontcare_overlap) return false;
  }
  return true;
}

std::vector<std::size_t> filter_boxes(std::span<const BBox> boxes,
                                      std::span<const BBox> dontcare,
                                      const BoxFilter& filter) {
  if (filter.min_height < 0.0) throw std::invalid_argument("min_height must be >= 0");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (passes_filter(boxes[i], dontcare, filter)) kept.push_back(i);
  }
  return kept;
}

}  // namespace recd
