#include "airtrack/fuser.hpp"

#include <algorithm>
#include <cmath>

namespace airtrack {

void FusionConfig::normalize_weights() {
  double total = 0.0;
  for (const auto& [name, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kConfigError, "fusion weight for '" + name + "' must be >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kConfigError, "fusion weights must have a positive sum");
  for (auto& [name, w] : weights) w /= total;
  for (const auto& [name, spec] : normalizers) {
    if (!(spec.scale > 0.0)) {
      throw Error(ErrorCode::kConfigError, "normalizer scale for '" + name + "' must be > 0");
    }
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) {
    throw Error(ErrorCode::kConfigError, "fusion epsilon must be in (0, 1e-3]");
  }
}

double normalize(double raw, const NormalizerSpec& spec) {
  if (!std::isfinite(raw)) throw Error(ErrorCode::kNonFiniteInput, "raw score is not finite");
  switch (spec.kind) {
    case NormalizerKind::kLikelihoodRatio:
      if (raw < 0.0) throw Error(ErrorCode::kNonFiniteInput, "likelihood must be >= 0");
      return raw / (raw + spec.scale);
    case NormalizerKind::kExpNegScaled:
      return std::exp(-raw / spec.scale);
    case NormalizerKind::kIdentity:
      return std::clamp(raw, 0.0, 1.0);
  }
  return 0.0;
}

double normalize(const RawScore& raw, const NormalizerSpec& spec) {
  NormalizerSpec s = spec;
  if (spec.scale_at_gate && raw.reference && *raw.reference > 0.0) s.scale = *raw.reference;
  return normalize(raw.raw, s);
}

double fuse(const std::map<std::string, double>& scores, const FusionConfig& cfg) {
  double total_w = 0.0, acc = 0.0;
  for (const auto& [name, w] : cfg.weights) {
    const auto it = scores.find(name);
    if (it == scores.end()) throw Error(ErrorCode::kMissingComparator, "no score for '" + name + "'");
    acc += w * it->second;
    total_w += w;
  }
  if (!(total_w > 0.0)) throw Error(ErrorCode::kConfigError, "fusion weights must have a positive sum");
  return std::clamp(acc / total_w, 0.0, 1.0);
}

double fused_log_score(double fused, double epsilon) { return std::log(std::max(fused, epsilon)); }

std::string_view to_string(NormalizerKind kind) {
  switch (kind) {
    case NormalizerKind::kLikelihoodRatio: return "likelihood_ratio";
    case NormalizerKind::kExpNegScaled: return "exp_neg_scaled";
    case NormalizerKind::kIdentity: return "identity";
  }
  return "identity";
}

NormalizerKind parse_normalizer_kind(std::string_view text) {
  if (text == "likelihood_ratio") return NormalizerKind::kLikelihoodRatio;
  if (text == "exp_neg_scaled") return NormalizerKind::kExpNegScaled;
  if (text == "identity") return NormalizerKind::kIdentity;
  throw Error(ErrorCode::kConfigError, "unknown normalizer kind '" + std::string(text) + "'");
}

}  // namespace airtrack
