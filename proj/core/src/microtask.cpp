#include "recd/microtask.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace recd {

namespace {

constexpr std::array<std::string_view, 3> kBinaryOptions{options::kYes, options::kNo,
                                                         options::kCantSolve};
constexpr std::array<std::string_view, 5> kActivityOptions{
    options::kWalking, options::kRiding, options::kSitting, options::kOther,
    options::kCantSolve};

constexpr std::array<std::pair<MicrotaskKind, std::string_view>, 6> kKindNames{{
    {MicrotaskKind::DirectBox, "direct_box"},
    {MicrotaskKind::Keypoint, "keypoint"},
    {MicrotaskKind::KeypointBox, "keypoint_box"},
    {MicrotaskKind::IsPedestrian, "is_pedestrian"},
    {MicrotaskKind::IsHuman, "is_human"},
    {MicrotaskKind::Activity, "activity"},
}};

}  // namespace

std::string_view to_string(MicrotaskKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

MicrotaskKind parse_microtask_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown microtask kind: " + std::string(name));
}

bool is_semantic(MicrotaskKind kind) noexcept {
  return kind == MicrotaskKind::IsPedestrian || kind == MicrotaskKind::IsHuman ||
         kind == MicrotaskKind::Activity;
}

std::span<const std::string_view> answer_options(MicrotaskKind kind) noexcept {
  switch (kind) {
    case MicrotaskKind::IsPedestrian:
    case MicrotaskKind::IsHuman:
      return kBinaryOptions;
    case MicrotaskKind::Activity:
      return kActivityOptions;
    default:
      return {};
  }
}

bool answer_valid_for(MicrotaskKind kind, const Answer& answer) {
  if (is_semantic(kind)) {
    const auto* token = std::get_if<std::string>(&answer);
    if (token == nullptr) return false;
    const auto opts = answer_options(kind);
    return std::find(opts.begin(), opts.end(), *token) != opts.end();
  }
  // Direct-box and keypoint answers may be empty: the annotator found no
  // unmarked human.
  switch (kind) {
    case MicrotaskKind::DirectBox:
      return std::holds_alternative<std::vector<BBox>>(answer);
    case MicrotaskKind::Keypoint:
      return std::holds_alternative<std::vector<Point>>(answer);
    default:
      return std::holds_alternative<BBox>(answer);
  }
}

}  // namespace recd
