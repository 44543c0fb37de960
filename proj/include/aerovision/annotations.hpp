#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aerovision {

/// Axis-aligned box in normalized [0,1] coordinates.
struct BoundingBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  bool is_valid() const {
    return 0.0 <= x_min && x_min < x_max && x_max <= 1.0 && 0.0 <= y_min && y_min < y_max &&
           y_max <= 1.0;
  }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct LabeledBox {
  BoundingBox box;
  std::size_t class_id = 0;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

enum class AnnotationKind { Detection, Mask, Action };

std::string_view to_string(AnnotationKind kind);

struct Sample {
  std::string id;
  std::filesystem::path frame;  // may be empty for action samples
  AnnotationKind kind = AnnotationKind::Detection;
  std::vector<LabeledBox> boxes;               // Detection
  std::filesystem::path mask;                  // Mask
  std::size_t action_class = 0;                // Action
  std::vector<std::filesystem::path> action_frames;  // Action
};

struct DatasetIndex {
  std::vector<std::string> vocabulary;
  std::vector<Sample> samples;

  const Sample* find(std::string_view id) const;
};

/// Parses the JSON manifest. Relative paths resolve against `base_dir`.
/// Throws SchemaViolation (message carries a JSON pointer to the field) or
/// DuplicateSampleId.
DatasetIndex parse_manifest(std::string_view document, const std::filesystem::path& base_dir = {});
DatasetIndex load_manifest(const std::filesystem::path& path);
std::string write_manifest(const DatasetIndex& index, const std::filesystem::path& base_dir = {});

struct ValidationIssue {
  enum class Kind { MissingFile, InvalidBox, ClassOverflow, EmptyFrameRange, MaskMismatch };
  Kind kind;
  std::string sample_id;
  std::string detail;
};

std::string_view to_string(ValidationIssue::Kind kind);

/// Lists every violated invariant; an empty report means the dataset is consistent.
std::vector<ValidationIssue> validate(const DatasetIndex& index);

/// Stratum used when splitting: majority box class (ties to lowest id) for
/// detections, the action class for actions. Masks and empty detections have none.
std::optional<std::size_t> stratification_label(const Sample& sample);

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> folds;  // sample_id -> fold
  std::vector<std::string> holdout;          // optional held-out test ids

  std::string to_json() const;
  static FoldAssignment from_json(std::string_view document);
};

/// Label-balanced k-fold partition. Samples of each stratum are shuffled with
/// the seeded generator and dealt round-robin, continuing the deal position
/// across strata so that overall fold sizes also differ by at most one.
/// With `holdout_fraction` > 0, round(fraction * n_c) samples per stratum are
/// first set aside as a test split.
FoldAssignment stratified_kfold(const DatasetIndex& index, std::size_t k, std::uint64_t seed,
                                double holdout_fraction = 0.0);

}  // namespace aerovision
