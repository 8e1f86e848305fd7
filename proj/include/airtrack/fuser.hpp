// Similarity fuser: per-comparator normalization to [0, 1], weighted mean and
// log score for hypothesis accumulation.
#pragma once

#include <map>
#include <optional>
#include <string>

#include "airtrack/core.hpp"

namespace airtrack {

enum class NormalizerKind { kLikelihoodRatio, kExpNegScaled, kIdentity };

struct NormalizerSpec {
  NormalizerKind kind = NormalizerKind::kIdentity;
  double scale = 1.0;
  // Likelihood comparators: use the likelihood at the gating boundary
  // (RawScore::reference) as the scale when available.
  bool scale_at_gate = false;
};

struct FusionConfig {
  std::map<std::string, double> weights;
  std::map<std::string, NormalizerSpec> normalizers;
  double epsilon = 1e-6;

  // Checks weights and renormalizes them to sum to 1.
  void normalize_weights();
};

// Throws NonFiniteInput for non-finite raw (or negative likelihoods).
double normalize(double raw, const NormalizerSpec& spec);
double normalize(const RawScore& raw, const NormalizerSpec& spec);

// Weighted mean over the configured comparators; throws MissingComparator.
double fuse(const std::map<std::string, double>& scores, const FusionConfig& cfg);

double fused_log_score(double fused, double epsilon);

std::string_view to_string(NormalizerKind kind);
NormalizerKind parse_normalizer_kind(std::string_view text);

}  // namespace airtrack
