#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "recd/geometry.hpp"

namespace recd {

enum class MicrotaskKind { DirectBox, Keypoint, KeypointBox, IsPedestrian, IsHuman, Activity };

std::string_view to_string(MicrotaskKind kind) noexcept;
MicrotaskKind parse_microtask_kind(std::string_view name);

bool is_semantic(MicrotaskKind kind) noexcept;

namespace options {
inline constexpr std::string_view kYes = "Yes";
inline constexpr std::string_view kNo = "No";
inline constexpr std::string_view kCantSolve = "Can't See/Can't Solve";
inline constexpr std::string_view kWalking = "Walking/Running/Standing";
inline constexpr std::string_view kRiding = "Riding/Driving a vehicle";
inline constexpr std::string_view kSitting = "Sitting/Lying down";
inline constexpr std::string_view kOther = "Other activity";
}  // namespace options

/// Answer options offered for a semantic task kind, in display order.
/// Localization kinds have no option set and return an empty span.
std::span<const std::string_view> answer_options(MicrotaskKind kind) noexcept;

struct Point {
  double x;
  double y;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Option token (semantic tasks), one drawn box (keypoint-box tasks), all boxes
/// an annotator drew on an image (direct-box tasks), or placed keypoints.
using Answer = std::variant<std::string, BBox, std::vector<BBox>, std::vector<Point>>;

bool answer_valid_for(MicrotaskKind kind, const Answer& answer);

struct Microtask {
  std::string task_id;
  MicrotaskKind kind = MicrotaskKind::IsHuman;
  std::string image_id;
  std::optional<BBox> bbox;       // box under review (semantic tasks)
  std::vector<Point> keypoints;   // keypoint group to enclose (keypoint-box tasks)
  std::string subject_id;         // proposal or box identifier the task refers to
  int assignments = 11;           // distinct annotators required
  double priority = 0.0;          // served in descending order
};

struct AnnotatorResponse {
  std::string task_id;
  std::string annotator_id;
  Answer answer;
  std::int64_t duration_ms = 0;
  std::int64_t timestamp_ms = 0;
};

}  // namespace recd
