#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "recd/dataset_io.hpp"
#include "recd/geometry.hpp"
#include "recd/softlabel.hpp"

namespace recd {

using SoftLabelsByImage = std::map<std::string, std::vector<SoftLabeledObject>>;

SoftLabelsByImage group_by_image(std::span<const SoftLabeledObject> objects);

struct ErrorCountConfig {
  double p_threshold = 0.5;
  double min_height = 0.0;
  bool dontcare_excluded = false;
  DontCareRule dontcare_rule = DontCareRule::Iou;
};

struct ErrorCountReport {
  ErrorCountConfig config;
  std::size_t overlooked = 0;
  std::size_t misfitting = 0;
  std::size_t fn_total = 0;     // overlooked + misfitting
  std::size_t validated = 0;    // VGT boxes that passed the filters
  std::size_t original_gt = 0;  // pedestrian boxes in the original labels
  double fnr = 0.0;
};

/// VGT boxes with p >= threshold that pass the height and don't-care filters
/// are classified against the original pedestrian boxes. Don't-care regions
/// come from the original labels.
ErrorCountReport count_errors(const SoftLabelsByImage& vgt, const LabelSet& gt,
                              const ErrorCountConfig& config);

/// fn / (fn + original). Throws when original_count is 0.
double fnr(std::size_t fn_total, std::size_t original_count);
double fnr(const ErrorCountReport& report);

/// p in {0.5, 0.8} x min height in {0, 25, 40} x don't-care {kept, excluded}.
std::vector<ErrorCountConfig> table3_grid();
std::vector<ErrorCountReport> count_error_grid(const SoftLabelsByImage& vgt, const LabelSet& gt,
                                               std::span<const ErrorCountConfig> grid);

/// Columns: p_threshold,min_height,dontcare_excluded,overlooked,misfitting,
/// fn_total,original_gt,fnr
void write_error_counts_csv(std::ostream& out, std::span<const ErrorCountReport> reports);

struct FoundErrorConfig {
  double gt_iou = 0.5;
  double vgt_iou = 0.1;
  double min_height = 25.0;
  double p_threshold = 0.5;
};

struct CandidateBox {
  std::string image_id;
  BBox bbox;
  double score = 0.0;
  std::optional<SoftLabel> label;  // strategy verdict; none means validated like the VGT
};

/// VGT-only boxes: VGT boxes at p >= threshold and min height that have no
/// IoU >= gt_iou match among the original pedestrians.
SoftLabelsByImage vgt_only_boxes(const SoftLabelsByImage& vgt, const LabelSet& gt,
                                 const FoundErrorConfig& config);

/// Candidates (at min height) left unmatched by the original pedestrians at
/// gt_iou that match a VGT-only box at vgt_iou, both greedy one-to-one.
std::size_t found_label_errors(std::span<const CandidateBox> candidates, const LabelSet& gt,
                               const SoftLabelsByImage& vgt, const FoundErrorConfig& config);

/// Per-candidate flag of the rule above.
std::vector<bool> found_error_flags(std::span<const CandidateBox> candidates, const LabelSet& gt,
                                    const SoftLabelsByImage& vgt, const FoundErrorConfig& config);

/// Strategy boxes whose accept/reject decision differs from the VGT's. A
/// strategy box takes the decision of its greedy IoU >= match_iou VGT partner
/// and counts as a VGT reject when it has none.
std::size_t introduced_errors(std::span<const SoftLabeledObject> strategy,
                              const SoftLabelsByImage& vgt, double p_threshold,
                              double match_iou = kMatchIou);

struct CurvePoint {
  double threshold = 0.0;
  double cost_seconds = 0.0;
  std::size_t found_fn = 0;
  std::size_t introduced_errors = 0;
  std::size_t reviewed = 0;
};

struct CurveConfig {
  FoundErrorConfig found;
  double validation_seconds = 124.75;  // per reviewed box
  double stage1_seconds = 0.0;         // per reviewed box, human strategies only
};

/// Descending grid 1.0, 0.95, ..., 0.0.
std::vector<double> default_thresholds();

/// For each threshold, reviews the candidates scored strictly above it. A
/// candidate counts as found when it satisfies the found-error rule and its
/// verdict (if any) accepts it. Thresholds must be non-increasing.
std::vector<CurvePoint> cost_error_curve(std::span<const CandidateBox> candidates,
                                         std::span<const double> thresholds, const LabelSet& gt,
                                         const SoftLabelsByImage& vgt, const CurveConfig& config);

/// Columns: threshold,cost_seconds,found_fn,introduced_errors,reviewed
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

struct AuditCrop {
  BBox box;
  BBox crop;  // box grown by 50% around its center, clipped to the image
};

struct AuditImage {
  std::string image_id;
  std::vector<AuditCrop> crops;
};

struct AuditSample {
  std::uint64_t seed = 0;
  std::vector<AuditImage> images;
};

/// Seeded uniform sample of n images (sorted by id) with a crop per labeled
/// pedestrian. Throws when n exceeds the image count.
AuditSample audit_sample(const LabelSet& labels, std::size_t n, std::uint64_t seed,
                         double image_width = 1242.0, double image_height = 375.0);
void write_audit_manifest(std::ostream& out, const AuditSample& sample);

/// Reviewer verdict rate k / n.
double audit_rate(std::size_t k, std::size_t n);

struct FalsePositiveReport {
  std::size_t gt_boxes = 0;
  std::size_t below_threshold = 0;  // best VGT partner has p < threshold
  std::size_t without_partner = 0;  // no VGT box at IoU >= match_iou
};

/// Original pedestrian boxes the VGT doubts. Reported, never applied.
FalsePositiveReport false_positive_analysis(const LabelSet& gt, const SoftLabelsByImage& vgt,
                                            double p_threshold, double match_iou = kMatchIou);

}  // namespace recd
