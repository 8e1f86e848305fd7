// File formats: detections, ground truth / track records, assignments,
// metrics tables, PPM chips and model checkpoints.
//
// All text formats are line-oriented CSV with a versioned '#' header line.
// Reals are written with %.17g so every record round-trips exactly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "airtrack/autodiff.hpp"
#include "airtrack/core.hpp"
#include "airtrack/deepekf.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/mht.hpp"
#include "airtrack/visual.hpp"

namespace airtrack::io {

namespace fs = std::filesystem;

// Binary PPM (P6) for RGB chips, PGM (P5) for grayscale, 8 bits per sample.
void write_chip(const fs::path& path, const Chip& chip);
Chip read_chip(const fs::path& path);

struct DetectionSet {
  std::vector<Detection> detections;  // file order; frames non-decreasing
  deepekf::FrameGeometry geometry;
  int missing_chips = 0;  // rows whose chip file was absent; a zero chip is used
};

// Chip files are written under `chip_dir` (relative paths are stored relative
// to the detection file's directory). An empty chip_dir stores no chips.
void save_detections(const fs::path& path, std::span<const Detection> detections,
                     const deepekf::FrameGeometry& geometry, const std::string& chip_dir = "chips");

// Throws ParseError with the line number; out-of-order frames are an error.
DetectionSet load_detections(const fs::path& path);

void save_tracks(const fs::path& path, std::span<const eval::TrackRecord> tracks);
std::vector<eval::TrackRecord> load_tracks(const fs::path& path);

void save_assignments(const fs::path& path, std::span<const Assignment> assignments);
std::vector<Assignment> load_assignments(const fs::path& path);

void save_metrics(const fs::path& path, std::span<const eval::MetricsRow> rows);
std::string format_metrics(std::span<const eval::MetricsRow> rows);

// Checkpoint: "airtrack-checkpoint 1", "kind <name>", "config <key> <value>"
// lines, then per tensor "tensor <name> <rows> <cols>" followed by one line
// per row, and a final "end".
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> config;
  std::map<std::string, ad::Matrix> tensors;
};

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);

void save_model(const fs::path& path, const deepekf::DeepEkfModel& model);
void save_model(const fs::path& path, const visual::SiameseModel& model);
deepekf::DeepEkfModel load_deepekf(const fs::path& path);
visual::SiameseModel load_siamese(const fs::path& path);

// FNV-1a of a file's bytes.
std::uint64_t file_hash(const fs::path& path);

}  // namespace airtrack::io
