// Signature comparator implementations used by the associators.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>

#include "airtrack/core.hpp"
#include "airtrack/deepekf.hpp"
#include "airtrack/kinematic.hpp"
#include "airtrack/visual.hpp"

namespace airtrack {

// Likelihood of the detection center under the branch's predicted state.
class EkfComparator : public SignatureComparator {
 public:
  EkfComparator(NoiseConfig noise, double gate_threshold, std::string name = "ekf");
  std::string_view name() const override { return name_; }
  ComparatorKind kind() const override { return ComparatorKind::kKinematic; }
  RawScore compare(const BranchView& branch, const Detection& det) const override;

 private:
  NoiseConfig noise_;
  double gate_threshold_;
  std::string name_;
};

// Latent Gaussian affinity from the DeepEKF model. Branches with fewer than
// two observations are scored by the EKF comparator under the same name.
class DeepEkfComparator : public SignatureComparator {
 public:
  DeepEkfComparator(std::shared_ptr<const deepekf::DeepEkfModel> model, NoiseConfig noise,
                    double gate_threshold, deepekf::FrameGeometry geometry,
                    std::string name = "dekf");
  std::string_view name() const override { return name_; }
  ComparatorKind kind() const override { return ComparatorKind::kKinematic; }
  RawScore compare(const BranchView& branch, const Detection& det) const override;

 private:
  const deepekf::FeatureVector& feature(const Detection& det, double dt) const;

  std::shared_ptr<const deepekf::DeepEkfModel> model_;
  EkfComparator fallback_;
  deepekf::FrameGeometry geometry_;
  double latent_threshold_;
  std::string name_;
  mutable std::map<std::pair<DetectionId, std::int64_t>, deepekf::FeatureVector> features_;
};

// SSD between the branch's latest chip and the detection chip, both resized
// to size x size.
class SsdComparator : public SignatureComparator {
 public:
  explicit SsdComparator(int size = 100, std::string name = "ssd");
  std::string_view name() const override { return name_; }
  ComparatorKind kind() const override { return ComparatorKind::kVisual; }
  RawScore compare(const BranchView& branch, const Detection& det) const override;

 private:
  const Chip& resized(const Detection& det) const;

  int size_;
  std::string name_;
  mutable std::unordered_map<DetectionId, Chip> cache_;
};

// Euclidean distance between Siamese embeddings of the branch's latest chip
// and the detection chip.
class SiameseComparator : public SignatureComparator {
 public:
  SiameseComparator(std::shared_ptr<const visual::SiameseModel> model, std::string name = "siamese");
  std::string_view name() const override { return name_; }
  ComparatorKind kind() const override { return ComparatorKind::kVisual; }
  RawScore compare(const BranchView& branch, const Detection& det) const override;

 private:
  const visual::Embedding& embedding(const Detection& det) const;

  std::shared_ptr<const visual::SiameseModel> model_;
  std::string name_;
  mutable std::unordered_map<DetectionId, visual::Embedding> cache_;
};

}  // namespace airtrack
