#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "recd/geometry.hpp"
#include "recd/microtask.hpp"

namespace recd {

/// Latent semantics of one object. Each field is the probability that a
/// careful annotator perceives the object that way; 0/1 for clear cases.
struct SemanticTruth {
  double human = 1.0;
  double walking = 1.0;  // standing or walking, as opposed to `other_activity`
  std::string other_activity = std::string(options::kSitting);
};

/// Everything visible in one image, for the localization tasks.
struct ImageTruth {
  std::vector<BBox> objects;
};

using LatentTruth = std::variant<SemanticTruth, ImageTruth, BBox>;

struct AnnotatorModel {
  double accuracy = 0.9;         // P(report what was perceived)
  double cant_solve_rate = 0.0;  // drawn before accuracy
  /// Mean seconds per single response, per task kind.
  std::map<MicrotaskKind, double> mean_seconds = default_mean_seconds();
  double duration_sigma = 0.5;  // log-normal shape
  double box_jitter = 0.02;     // per-edge sd as a fraction of box width/height
  double recall = 1.0;          // P(an annotator marks a given unmarked object)
  double keypoint_jitter = 0.1;  // sd of keypoint placement, fraction of box size
  std::uint64_t seed = 0;

  static std::map<MicrotaskKind, double> default_mean_seconds();
};

/// Deterministic 64-bit mix of a seed and string keys.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view a, std::string_view b = {});

/// Seeded stochastic annotator. Every response is a pure function of
/// (model seed, task id, annotator id), so order of calls does not matter.
class AnnotatorSimulator {
 public:
  explicit AnnotatorSimulator(AnnotatorModel model);

  const AnnotatorModel& model() const noexcept { return model_; }

  /// One response to a task given the latent truth. For direct-box and
  /// keypoint tasks `already_marked` lists objects earlier annotators marked;
  /// those are skipped.
  AnnotatorResponse answer(const Microtask& task, const LatentTruth& truth,
                           std::string_view annotator_id,
                           const std::vector<BBox>& already_marked = {}) const;

  BBox jitter_box(const BBox& box, std::mt19937_64& rng) const;

 private:
  std::string semantic_answer(MicrotaskKind kind, const SemanticTruth& truth,
                              std::mt19937_64& rng) const;
  std::int64_t sample_duration_ms(MicrotaskKind kind, std::mt19937_64& rng) const;

  AnnotatorModel model_;
};

}  // namespace recd
