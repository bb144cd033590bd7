#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "recd/boosting.hpp"
#include "recd/geometry.hpp"

namespace recd {

struct Detection {
  std::string image_id;
  BBox bbox;
  double score;
};

using BoxesByImage = std::map<std::string, std::vector<BBox>>;

enum class ScoreMethod { Objectness, ObjectLabOverlooked, ObjectLabBadLoc, MetaDetect };
enum class ProposalTarget { PredictionBox, OriginalGtBox };

std::string_view to_string(ScoreMethod method) noexcept;
std::string_view to_string(ProposalTarget target) noexcept;
ScoreMethod parse_score_method(std::string_view name);
ProposalTarget parse_proposal_target(std::string_view name);

struct Proposal {
  std::string image_id;
  BBox bbox;
  double detector_score = 0.0;
  double error_probability = 0.0;
  ScoreMethod method = ScoreMethod::Objectness;
  ProposalTarget target = ProposalTarget::PredictionBox;
};

/// Sorts by descending error probability; equal probabilities keep input order.
void sort_proposals(std::vector<Proposal>& proposals);

/// Baseline: every detection proposed with its own score as error probability.
std::vector<Proposal> rank_by_objectness(std::span<const Detection> predictions);

/// ObjectLab-style adaptation.
///   overlooked(pred) = confidence * (1 - max IoU(pred, GT of its image))
///   badloc(gt)       = 1 - max over predictions of IoU(pred, gt) * confidence
/// Returned unsorted: prediction proposals in input order, then GT proposals
/// image by image.
std::vector<Proposal> objectlab_scores(std::span<const Detection> predictions,
                                       const BoxesByImage& gt);

struct ImageSize {
  double width = 1242.0;
  double height = 375.0;
};

inline constexpr std::size_t kMetaFeatureCount = 11;
using MetaFeatures = std::array<double, kMetaFeatureCount>;

/// Feature order of MetaFeatures.
enum MetaFeature : std::size_t {
  kScore,
  kWidth,
  kHeight,
  kArea,
  kAspect,  // width / height
  kNeighborCount,
  kNeighborMaxIou,
  kNeighborMeanIou,
  kNeighborMinIou,
  kCenterX,  // relative to image width
  kCenterY,  // relative to image height
};

struct MetaSample {
  std::size_t index;  // into the pre-NMS input
  MetaFeatures features;
};

/// Runs NMS over one image's pre-NMS candidates and describes each survivor
/// by its geometry, score, and its overlapping pre-NMS neighbours (any other
/// candidate with IoU > 0).
std::vector<MetaSample> extract_meta_features(std::span<const ScoredBox> pre_nms,
                                              const ImageSize& image,
                                              double nms_iou = 0.5);

/// 1 when the detection is a true positive against the GT of its image under
/// one-to-one greedy matching at `iou_threshold`, else 0.
std::vector<int> label_detections(std::span<const Detection> detections, const BoxesByImage& gt,
                                  double iou_threshold = 0.5);

enum class MetaLearner { GradientBoosting, Logistic };

struct MetaConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  MetaLearner learner = MetaLearner::GradientBoosting;
  ml::GbdtParams gbdt{};
  ml::LogisticParams logistic{};
  double iou_threshold = 0.5;
};

class DegenerateFold : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FoldModel {
  MetaFeatures mean{};
  MetaFeatures scale{};
  std::variant<ml::GradientBoostedTrees, ml::LogisticRegression> learner;

  double predict_correct(const MetaFeatures& features) const;
};

struct MetaModel {
  MetaLearner learner = MetaLearner::GradientBoosting;
  double iou_threshold = 0.5;
  std::vector<FoldModel> folds;

  /// Mean P(correct) over the fold models.
  double predict_correct(const MetaFeatures& features) const;
};

struct MetaCvResult {
  MetaModel model;
  std::vector<double> oof_correct;            // P(correct) from the held-out fold
  std::vector<double> oof_error_probability;  // 1 - oof_correct
  std::vector<int> fold_of;
  std::vector<double> fold_auroc;
};

/// Stratified k-fold assignment: each class is shuffled with `seed` and dealt
/// round-robin over the folds.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Cross-validated meta classifier. `correct` holds 1 for true positives.
/// Each sample's probability comes from the model trained without its fold.
MetaCvResult train_meta_cv(std::span<const MetaFeatures> features, std::span<const int> correct,
                           const MetaConfig& config);

enum class ProposalMethod { Objectness, ObjectLab, MetaDetect, InstanceWiseLoss };

class UnknownMethod : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedMethod : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ProposalMethod parse_proposal_method(std::string_view name);
std::string_view to_string(ProposalMethod method) noexcept;

struct ProposalConfig {
  double min_score = 0.01;  // detections below this are never proposed
  bool apply_nms = true;
  double nms_iou = 0.5;
  ImageSize default_image{};
  std::map<std::string, ImageSize> image_sizes;
  MetaConfig meta{};
};

/// Unified entry point: filters raw detections by score, applies per-image
/// NMS, scores with the chosen method and returns proposals in review order.
std::vector<Proposal> propose(ProposalMethod method, std::span<const Detection> raw_detections,
                              const BoxesByImage& gt, const ProposalConfig& config = {});

/// Proposal file: JSON-lines
/// {image_id, bbox, method, target, detector_score, error_probability}.
void write_proposals(std::ostream& out, std::span<const Proposal> proposals);
std::vector<Proposal> read_proposals(std::istream& in);

}  // namespace recd
