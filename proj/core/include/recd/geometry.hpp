#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recd {

class InvalidBox : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box in image pixels, top-left origin.
///
/// Construction validates that all coordinates are finite and that width and
/// height are strictly positive; zero-area boxes never exist as values.
class BBox {
 public:
  BBox(double left, double top, double right, double bottom);

  double left() const noexcept { return left_; }
  double top() const noexcept { return top_; }
  double right() const noexcept { return right_; }
  double bottom() const noexcept { return bottom_; }

  double width() const noexcept { return right_ - left_; }
  double height() const noexcept { return bottom_ - top_; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (left_ + right_); }
  double center_y() const noexcept { return 0.5 * (top_ + bottom_); }

  BBox translated(double dx, double dy) const;

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double left_;
  double top_;
  double right_;
  double bottom_;
};

std::string to_string(const BBox& box);

/// Intersection over union in continuous coordinates. Symmetric, in [0, 1].
double iou(const BBox& a, const BBox& b) noexcept;

/// Intersection area divided by the area of `box` (KITTI devkit style overlap).
double intersection_over_area(const BBox& box, const BBox& region) noexcept;

struct ScoredBox {
  BBox box;
  double score;
};

/// Greedy non-maximum suppression. Keeps the highest-scoring remaining box and
/// suppresses every remaining box with IoU strictly above `iou_threshold`.
/// Equal scores are ordered by lower input index. Returns kept indices in
/// descending score order.
std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_threshold);

struct MatchPair {
  std::size_t a;
  std::size_t b;
  double iou;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in the order they were fixed
  std::vector<std::size_t> unmatched_a;
  std::vector<std::size_t> unmatched_b;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// One-to-one greedy matching by descending IoU. Every cross pair with
/// IoU >= threshold is a candidate; ties are broken by (lower a, lower b).
MatchResult greedy_match(std::span<const BBox> a, std::span<const BBox> b,
                         double iou_threshold);

enum class MatchStatus { Matched, Misfitting, Overlooked };

std::string_view to_string(MatchStatus status) noexcept;

inline constexpr double kMatchIou = 0.5;

/// Status of each validated box against a reference set. A box that the
/// greedy assignment at IoU 0.5 leaves unmatched is Misfitting when it
/// intersects any reference box and Overlooked otherwise.
std::vector<MatchStatus> classify_errors(std::span<const BBox> validated,
                                         std::span<const BBox> reference);

enum class DontCareRule {
  Iou,                  // plain IoU against the region
  IntersectionOverArea  // fraction of the box covered by the region
};

struct BoxFilter {
  double min_height = 0.0;
  double dontcare_overlap = 0.5;
  DontCareRule dontcare_rule = DontCareRule::Iou;
};

bool passes_filter(const BBox& box, std::span<const BBox> dontcare,
                   const BoxFilter& filter) noexcept;

/// Indices of boxes with height >= min_height whose overlap with every
/// don't-care region stays below the configured limit.
std::vector<std::size_t> filter_boxes(std::span<const BBox> boxes,
                                      std::span<const BBox> dontcare,
                                      const BoxFilter& filter);

}  // namespace recd
