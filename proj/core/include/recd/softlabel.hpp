#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "recd/geometry.hpp"

namespace recd {

/// Response count per answer option. Composite labels prefix each option with
/// the name of the question it belongs to ("is_human:Yes").
using ResponseCounts = std::map<std::string, int>;

inline constexpr double kDefaultZ = 1.96;

/// A yes/no reading of one microtask: which answer options count as positive
/// and which are excluded from the valid-response denominator.
struct BinaryQuestion {
  std::string name;
  std::vector<std::string> positive;
  std::vector<std::string> invalid;
};

BinaryQuestion is_pedestrian_question();
BinaryQuestion is_human_question();
/// Activity read as "standing or walking": positive iff Walking/Running/Standing.
BinaryQuestion walking_question();

struct SoftLabel {
  double p_hat = 0.0;
  ResponseCounts counts;
  int n_valid = 0;
  int positives = 0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double z = kDefaultZ;
  bool refined = false;
  bool resolvable = false;
  bool composite = false;  // product of several questions; p_hat != positives / n_valid

  int n_responses() const noexcept;
  double ci_width() const noexcept { return ci_high - ci_low; }
};

struct Interval {
  double low;
  double high;
};

/// Wilson score interval for k successes in n trials, clipped to [0, 1].
/// k == 0 pins the lower bound to 0 and k == n pins the upper bound to 1.
Interval wilson_interval(int k, int n, double z = kDefaultZ);

SoftLabel label_from_counts(const ResponseCounts& counts, const BinaryQuestion& question,
                            double z = kDefaultZ);

/// Unweighted aggregation of option tokens. Invalid options are dropped from
/// the denominator; if nothing valid remains the label is unresolvable.
SoftLabel aggregate_binary(std::span<const std::string> answers, const BinaryQuestion& question,
                           double z = kDefaultZ);

/// Pedestrian label as the product of "is human" and "standing or walking".
/// The interval comes from the delta method on the binomial variances of
/// both factors. Counts of both factors are carried with question prefixes.
SoftLabel product_soft_label(const SoftLabel& human, const SoftLabel& activity,
                             const std::string& human_name = "is_human",
                             const std::string& activity_name = "activity",
                             double z = kDefaultZ);

struct AmbiguityBand {
  double low = 0.2;
  double high = 0.8;
};

bool needs_refinement(const SoftLabel& label, const AmbiguityBand& band = {}) noexcept;

/// Pools a second batch of responses to the same question into `base`.
SoftLabel merge_refinement(const SoftLabel& base, std::span<const std::string> extra,
                           const BinaryQuestion& question);

/// How a label is derived from pooled counts: a single question, or the
/// product of two questions whose counts are stored under name prefixes.
struct LabelRecipe {
  std::vector<BinaryQuestion> factors;
  double z = kDefaultZ;

  static LabelRecipe single(BinaryQuestion q, double z = kDefaultZ);
  static LabelRecipe pedestrian_product(double z = kDefaultZ);
};

SoftLabel evaluate_recipe(const ResponseCounts& counts, const LabelRecipe& recipe,
                          bool refined = false);

ResponseCounts pool_counts(const ResponseCounts& a, const ResponseCounts& b);

struct SoftLabeledObject {
  std::string image_id;
  std::string group_id;
  BBox bbox;
  SoftLabel label;
  std::vector<std::string> tasks;
  int multiplicity = 1;  // annotator boxes aggregated into this box
  std::vector<std::string> members;
};

/// Pools every member's counts into one label. The representative box is the
/// member with the highest multiplicity, ties broken by larger area, then by
/// position in `members`.
SoftLabeledObject aggregate_duplicate_group(std::span<const SoftLabeledObject> members,
                                            const LabelRecipe& recipe);

}  // namespace recd
