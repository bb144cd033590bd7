#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recd/annotator_sim.hpp"
#include "recd/dataset_io.hpp"
#include "recd/geometry.hpp"
#include "recd/microtask.hpp"
#include "recd/proposal_scoring.hpp"
#include "recd/softlabel.hpp"

namespace recd {

inline constexpr int kStage1Annotators = 3;
inline constexpr int kSemanticAnnotators = 11;

enum class BoxSource { DirectBox, KeypointToBox, Combined, DetectorProposals };
enum class Validation { IsPedestrian11, HumanAndActivity22, HumanAndActivityAR, VgtFull };

std::string_view to_string(BoxSource source) noexcept;
std::string_view to_string(Validation validation) noexcept;
BoxSource parse_box_source(std::string_view name);
Validation parse_validation(std::string_view name);

bool uses_refinement(Validation v) noexcept;
LabelRecipe recipe_for(Validation v, double z = kDefaultZ);

struct Strategy {
  BoxSource box_source = BoxSource::DetectorProposals;
  Validation validation = Validation::HumanAndActivityAR;
  double acceptance_threshold = 0.5;
};

/// Per-box annotation costs in seconds.
struct CostTable {
  double direct_box = 44.11;
  double keypoint_to_box = 92.671;
  double combined_box = 103.79;
  double is_pedestrian = 37.87;
  double human_activity = 57.03;
  double human_activity_ar = 77.85;
  double vgt_full = 124.75;

  double stage1_seconds(BoxSource source) const noexcept;
  double validation_seconds(Validation validation) const noexcept;
};

std::int64_t to_millis(double seconds) noexcept;

struct CostEntry {
  std::string task_id;
  std::string kind;
  std::int64_t millis;
};

/// Annotation time, kept in integer milliseconds so totals are exact.
class CostLedger {
 public:
  void add(std::string task_id, std::string kind, std::int64_t millis);

  std::span<const CostEntry> entries() const noexcept { return entries_; }
  std::int64_t total_millis() const noexcept { return total_; }
  double total_seconds() const noexcept { return static_cast<double>(total_) / 1000.0; }
  std::map<std::string, std::int64_t> totals_by_kind() const;

 private:
  std::vector<CostEntry> entries_;
  std::int64_t total_ = 0;
};

/// A box submitted for semantic validation.
struct ReviewBox {
  std::string box_id;
  std::string image_id;
  BBox bbox;
  double priority = 0.0;
  BoxSource origin = BoxSource::DetectorProposals;
  bool original_gt = false;
  std::string group_id;  // duplicates of one object share this
  int multiplicity = 1;
};

std::vector<ReviewBox> review_boxes_from_proposals(std::span<const Proposal> proposals);

/// Semantic validation tasks, one per question per box, 11 assignments each.
std::vector<Microtask> generate_microtasks(Validation validation, std::span<const ReviewBox> boxes);
/// Second batch of 11 for each question of the given boxes.
std::vector<Microtask> generate_refinement_tasks(Validation validation,
                                                 std::span<const ReviewBox> boxes);
/// Per-image localization tasks with 3 assignments each. Keypoint-to-box
/// yields only the keypoint stage here; box tasks follow keypoint clustering.
std::vector<Microtask> generate_stage1_tasks(BoxSource source,
                                             std::span<const std::string> image_ids);

class ResponseSource {
 public:
  virtual ~ResponseSource() = default;
  /// Responses for the given tasks. A live source may return fewer than the
  /// requested assignments when it runs out of time.
  virtual std::vector<AnnotatorResponse> collect(std::span<const Microtask> tasks) = 0;
};

class TruthOracle {
 public:
  virtual ~TruthOracle() = default;
  virtual LatentTruth truth_for(const Microtask& task) const = 0;
};

struct WorldObject {
  BBox box;
  SemanticTruth semantics;
};

/// Planted ground truth for simulation. Semantic tasks resolve to the object
/// with the best IoU (>= match_iou) or to a clear non-human; localization
/// tasks see every object that is human with probability >= 0.5.
class SyntheticWorld : public TruthOracle {
 public:
  explicit SyntheticWorld(std::map<std::string, std::vector<WorldObject>> objects,
                          double match_iou = 0.5);

  LatentTruth truth_for(const Microtask& task) const override;
  const std::map<std::string, std::vector<WorldObject>>& objects() const noexcept {
    return objects_;
  }

 private:
  std::map<std::string, std::vector<WorldObject>> objects_;
  double match_iou_;
};

/// Answers every assignment with the simulator. Annotators come from a fixed
/// pool; each task draws distinct annotators with a seeded shuffle.
class SimulatedSource : public ResponseSource {
 public:
  SimulatedSource(AnnotatorSimulator simulator, const TruthOracle& truth, int pool_size = 200);

  std::vector<AnnotatorResponse> collect(std::span<const Microtask> tasks) override;

 private:
  AnnotatorSimulator simulator_;
  const TruthOracle& truth_;
  int pool_size_;
  std::int64_t clock_ms_ = 0;
};

struct CorrectionConfig {
  AmbiguityBand band{};
  double z = kDefaultZ;
  CostTable costs{};
};

struct ReviewedBox {
  ReviewBox box;
  SoftLabel label;
  std::vector<std::string> tasks;
};

struct CorrectionOutcome {
  std::vector<ReviewedBox> accepted;
  std::vector<ReviewedBox> rejected;
  std::vector<ReviewedBox> unresolved;
  CostLedger ledger;
  bool source_exhausted = false;
  int refined_boxes = 0;

  /// Every reviewed box with its soft label, in review order.
  std::vector<SoftLabeledObject> soft_labels() const;
};

bool accept(const SoftLabel& label, double threshold) noexcept;

/// Aggregates the responses of one box's tasks into its soft label.
SoftLabel label_from_responses(Validation validation,
                               std::span<const AnnotatorResponse> primary_or_human,
                               std::span<const AnnotatorResponse> activity, double z);

/// Review loop: validation tasks, one refinement round where the strategy
/// allows it, duplicate pooling for the full VGT recipe, then thresholding.
/// The ledger holds every consumed response plus one stage-1 charge per
/// distinct human-drawn object.
CorrectionOutcome run_correction(const Strategy& strategy, std::span<const ReviewBox> boxes,
                                 ResponseSource& source, const CorrectionConfig& config = {});

using DuplicateResolver = std::function<bool(const BBox& a, const BBox& b, double iou)>;

/// Simulation stand-in for manual duplicate review: duplicate iff IoU >= min_iou.
DuplicateResolver iou_resolver(double min_iou = 0.5);

struct GroupedBox {
  BBox box;
  std::size_t group;
  bool from_b;
  std::size_t index;
};

struct DedupeResult {
  std::vector<GroupedBox> boxes;  // all inputs: `a` first, then `b`
  std::size_t group_count = 0;    // |a| + |b| - duplicates
  std::size_t duplicates = 0;
};

/// Starts from every box of `a` as its own group and folds in `b`. Pairs with
/// IoU > candidate_iou are offered to the resolver in descending IoU order; a
/// `b` box joins the group of the first `a` box it is resolved duplicate of.
DedupeResult dedupe_merge(std::span<const BBox> a, std::span<const BBox> b,
                          double candidate_iou, const DuplicateResolver& resolver);

/// Single-linkage grouping of points closer than `radius`. Groups are ordered
/// by their first member.
std::vector<std::vector<std::size_t>> cluster_keypoints(std::span<const Point> points,
                                                        double radius);

BBox median_box(std::span<const BBox> boxes);

struct Stage1Config {
  double keypoint_radius_px = 20.0;
  double candidate_iou = 0.25;
  DuplicateResolver resolver = iou_resolver();
};

/// Human box collection for one of the drawing strategies.
std::vector<ReviewBox> collect_boxes(BoxSource source, std::span<const std::string> image_ids,
                                     ResponseSource& responses, const Stage1Config& config = {});

struct CorrectedDataset {
  LabelSet labels;
  std::vector<SoftLabeledObject> sidecar;
};

/// Original labels pass through untouched; accepted non-GT boxes are added as
/// Pedestrian records. The sidecar lists every reviewed box.
CorrectedDataset emit_corrected_dataset(const CorrectionOutcome& outcome, const LabelSet& original);

}  // namespace recd
