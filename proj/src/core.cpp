#include "airtrack/core.hpp"

#include <algorithm>
#include <cmath>

namespace airtrack {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kAttentionDisabled: return "AttentionDisabled";
    case ErrorCode::kIdentityMissing: return "IdentityMissing";
    case ErrorCode::kMissingComparator: return "MissingComparator";
    case ErrorCode::kFrameOrderViolation: return "FrameOrderViolation";
    case ErrorCode::kSizeLimit: return "SizeLimit";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSpecError: return "SpecError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  if (a == b) return 1.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Chip::Chip(int width, int height, int channels)
    : Chip(width, height, channels,
           std::vector<double>(static_cast<std::size_t>(width) * height * channels, 0.0)) {}

Chip::Chip(int width, int height, int channels, std::vector<double> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::kInvalidArgument, "chip dims must be positive with 1 or 3 channels");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::kDimensionMismatch, "chip pixel buffer size does not match dims");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "chip pixel outside [0,1]");
    }
  }
}

Chip Chip::filled(int width, int height, int channels, double value) {
  return Chip(width, height, channels,
              std::vector<double>(static_cast<std::size_t>(width) * height * channels, value));
}

Chip resize_chip(const Chip& chip, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be positive");
  }
  if (chip.width() == target_w && chip.height() == target_h) return chip;

  const int channels = chip.channels();
  Chip out(target_w, target_h, channels);
  const double sx = static_cast<double>(chip.width()) / target_w;
  const double sy = static_cast<double>(chip.height()) / target_h;
  for (int r = 0; r < target_h; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(chip.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, chip.height() - 1);
    const double ty = fy - y0;
    for (int c = 0; c < target_w; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(chip.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, chip.width() - 1);
      const double tx = fx - x0;
      for (int k = 0; k < channels; ++k) {
        const double top = (1.0 - tx) * chip.at(y0, x0, k) + tx * chip.at(y0, x1, k);
        const double bottom = (1.0 - tx) * chip.at(y1, x0, k) + tx * chip.at(y1, x1, k);
        out.at(r, c, k) = std::clamp((1.0 - ty) * top + ty * bottom, 0.0, 1.0);
      }
    }
  }
  return out;
}

Chip to_grayscale(const Chip& chip) {
  if (chip.channels() == 1) return chip;
  Chip out(chip.width(), chip.height(), 1);
  for (int r = 0; r < chip.height(); ++r) {
    for (int c = 0; c < chip.width(); ++c) {
      const double y = 0.299 * chip.at(r, c, 0) + 0.587 * chip.at(r, c, 1) + 0.114 * chip.at(r, c, 2);
      out.at(r, c, 0) = std::clamp(y, 0.0, 1.0);
    }
  }
  return out;
}

bool PlatformMeta::valid() const {
  return latitude >= -90.0 && latitude <= 90.0 && longitude >= -180.0 && longitude <= 180.0 &&
         zoom > 0.0;
}

void Tracklet::add(const Detection& det) {
  if (!observations.empty() && det.frame_index <= observations.back().frame_index) {
    throw Error(ErrorCode::kFrameOrderViolation, "tracklet observations must increase in frame");
  }
  observations.push_back(det);
  last_update_frame = det.frame_index;
  misses = 0;
}

void Tracklet::mark_missed(std::int64_t current_frame) {
  misses = static_cast<int>(current_frame - last_update_frame);
}

}  // namespace airtrack
