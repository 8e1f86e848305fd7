// Shared domain types for the tracker: boxes, chips, detections, tracklets
// and the signature-comparator contract.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace airtrack {

enum class ErrorCode {
  kInvalidArgument,
  kSingularInnovation,
  kDimensionMismatch,
  kEmptySequence,
  kNonFiniteLoss,
  kNonFiniteInput,
  kAttentionDisabled,
  kIdentityMissing,
  kMissingComparator,
  kFrameOrderViolation,
  kSizeLimit,
  kEmptyGroundTruth,
  kParseError,
  kSpecError,
  kConfigError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using DetectionId = std::int64_t;
using TrackId = std::int64_t;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned box in real-valued pixel coordinates; (x, y) is the top-left.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  bool valid() const { return w > 0.0 && h > 0.0; }
  Point2 center() const { return {x + w / 2.0, y + h / 2.0}; }
  double area() const { return w * h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double iou(const BoundingBox& a, const BoundingBox& b);

// Image patch, row-major with interleaved channels, values in [0, 1].
class Chip {
 public:
  Chip() = default;
  Chip(int width, int height, int channels);
  Chip(int width, int height, int channels, std::vector<double> pixels);

  static Chip filled(int width, int height, int channels, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }
  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<double>& pixels() { return pixels_; }

  double at(int row, int col, int channel) const {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }
  double& at(int row, int col, int channel) {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }

  friend bool operator==(const Chip&, const Chip&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> pixels_;
};

// Bilinear resampling with pixel-center alignment. Same-size resize is an
// exact copy.
Chip resize_chip(const Chip& chip, int target_w, int target_h);

// ITU-R BT.601 luma; single-channel chips are returned unchanged.
Chip to_grayscale(const Chip& chip);

struct PlatformMeta {
  double longitude = 0.0;
  double latitude = 0.0;
  double camera_azimuth = 0.0;
  double camera_elevation = 0.0;
  double zoom = 1.0;

  bool valid() const;
  friend bool operator==(const PlatformMeta&, const PlatformMeta&) = default;
};

struct Detection {
  std::int64_t frame_index = 0;
  DetectionId detection_id = 0;
  BoundingBox box;
  std::string label;
  double confidence = 1.0;
  Chip chip;
  std::optional<PlatformMeta> platform;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Tracklet {
  TrackId track_id = 0;
  std::vector<Detection> observations;  // strictly increasing frame_index
  std::int64_t last_update_frame = 0;
  int misses = 0;

  void add(const Detection& det);
  void mark_missed(std::int64_t current_frame);
};

struct ComparatorScore {
  std::string comparator_name;
  double raw = 0.0;
  double normalized = 0.0;
};

// Opaque per-branch cache a comparator may attach to a hypothesis node.
struct ComparatorContext {
  virtual ~ComparatorContext() = default;
};

struct KinematicState;

// What a comparator sees of a hypothesis branch when scoring a detection.
struct BranchView {
  std::vector<const Detection*> observations;  // oldest first, non-empty
  const KinematicState* kinematic = nullptr;   // leaf filter state
  std::shared_ptr<const ComparatorContext>* context = nullptr;
};

// Raw comparator output before normalization. `reference` is the likelihood
// at the gating boundary for likelihood-valued comparators.
struct RawScore {
  double raw = 0.0;
  std::optional<double> reference;
};

enum class ComparatorKind { kKinematic, kVisual };

class SignatureComparator {
 public:
  virtual ~SignatureComparator() = default;
  virtual std::string_view name() const = 0;
  virtual ComparatorKind kind() const = 0;
  virtual RawScore compare(const BranchView& branch, const Detection& det) const = 0;
};

}  // namespace airtrack
