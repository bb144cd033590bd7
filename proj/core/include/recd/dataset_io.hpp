#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recd/geometry.hpp"
#include "recd/softlabel.hpp"

namespace recd {

inline constexpr std::string_view kPedestrianClass = "Pedestrian";
inline constexpr std::string_view kDontCareClass = "DontCare";

/// One line of a KITTI label or prediction file. Only the 2D box is
/// interpreted; the 3D fields are carried through unchanged.
struct LabeledObject {
  std::string class_name;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  BBox bbox;
  std::array<double, 3> dimensions{};  // height, width, length
  std::array<double, 3> location{};    // x, y, z
  double rotation_y = 0.0;
  std::optional<double> score;  // predictions only

  bool is_prediction() const noexcept { return score.has_value(); }
  friend bool operator==(const LabeledObject&, const LabeledObject&) = default;
};

/// A new record whose non-box fields use the KITTI "unknown" sentinels.
LabeledObject make_box_record(std::string class_name, const BBox& box,
                              std::optional<double> score = std::nullopt);

class KittiParseError : public std::runtime_error {
 public:
  KittiParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FieldCountError : public KittiParseError {
  using KittiParseError::KittiParseError;
};
class NumericParseError : public KittiParseError {
  using KittiParseError::KittiParseError;
};
class InvalidBoxError : public KittiParseError {
  using KittiParseError::KittiParseError;
};

std::vector<LabeledObject> parse_kitti_labels(std::istream& in);
std::vector<LabeledObject> parse_kitti_labels(const std::string& text);
void write_kitti_labels(std::ostream& out, std::span<const LabeledObject> objects);
std::string format_number(double value);

/// image id -> objects, as stored in a directory of `<image_id>.txt` files.
using LabelSet = std::map<std::string, std::vector<LabeledObject>>;

LabelSet read_label_dir(const std::filesystem::path& dir);
void write_label_dir(const std::filesystem::path& dir, const LabelSet& labels);

std::vector<BBox> boxes_of_class(std::span<const LabeledObject> objects,
                                 std::string_view class_name);

/// Soft-label sidecar: JSON-lines, one record per box.
void write_softlabel_sidecar(std::ostream& out, std::span<const SoftLabeledObject> objects);
std::vector<SoftLabeledObject> read_softlabel_sidecar(std::istream& in);

struct ImagePedestrianCount {
  std::string image_id;
  int pedestrians = 0;
};

std::vector<ImagePedestrianCount> pedestrian_counts(const LabelSet& labels);

struct SplitConfig {
  double target_fraction = 0.8;
  double tolerance = 0.01;
  std::uint64_t seed = 0;
  int max_attempts = 10000;
};

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> train_images;
  std::vector<std::string> val_images;
  double pedestrian_fraction_train = 0.0;
  int attempts = 0;
};

class UnsatisfiableSplit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded image-level split: floor(target * N) images go to training, and the
/// draw is repeated until the training share of pedestrians is within
/// `tolerance` of the target.
DatasetSplit stratified_split(std::span<const ImagePedestrianCount> images,
                              const SplitConfig& config);

struct SplitSummary {
  std::size_t train_images = 0;
  std::size_t val_images = 0;
  long train_pedestrians = 0;
  long val_pedestrians = 0;
};

/// Counts implied by a split manifest over the given per-image counts.
SplitSummary summarize_split(const DatasetSplit& split,
                             std::span<const ImagePedestrianCount> images);

void write_split_manifest(std::ostream& out, const DatasetSplit& split);
DatasetSplit read_split_manifest(std::istream& in);

}  // namespace recd
