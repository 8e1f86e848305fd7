// Seeded training and held-out data for the learned comparators.
#pragma once

#include <cstdint>
#include <vector>

#include "airtrack/deepekf.hpp"
#include "airtrack/rng.hpp"
#include "airtrack/visual.hpp"

namespace airtrack::training {

// Constant-velocity tracks with procedural chips. History lengths are drawn
// in [2, max_seq_len], horizons in [1, max_horizon].
struct DekfDataSpec {
  double max_speed = 5.0;      // px / frame per axis
  double position_noise = 1.0; // px
  int max_horizon = 3;
  deepekf::FrameGeometry geometry;
};

std::vector<deepekf::TrainingExample> make_dekf_examples(const deepekf::DeepEkfModel& model, int count,
                                                         const DekfDataSpec& spec, Rng& rng);

struct DekfTrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;  // on the training set after the last step
  std::vector<double> losses;
};

// Full-batch gradient descent on `examples`.
DekfTrainReport train_dekf(deepekf::DeepEkfModel& model,
                           const std::vector<deepekf::TrainingExample>& examples, int steps,
                           const ad::GradientDescent& optimizer);

// Fraction of examples whose true continuation has a higher affinity than each
// of `decoys` spatial decoys offset by 5 to 7 predicted standard deviations.
double dekf_ranking_accuracy(const deepekf::DeepEkfModel& model,
                             const std::vector<deepekf::TrainingExample>& examples, int decoys,
                             Rng& rng);

// Random positive and negative pairs over the ten procedural identities. One
// negative in three is drawn from the two near-identical identities.
std::vector<visual::ChipPair> make_pairs(const visual::SiameseConfig& cfg, int positives, int negatives,
                                         Rng& rng);

struct ReidSplit {
  std::vector<visual::LabeledChip> queries;
  std::vector<visual::LabeledChip> gallery;
};
ReidSplit make_reid_split(const visual::SiameseConfig& cfg, int gallery_per_id, int queries_per_id,
                          Rng& rng);

struct ReidTrainReport {
  double initial_loss = 0.0;  // on the fixed probe batch
  double final_loss = 0.0;
  std::vector<double> losses;  // per step, on the step's batch
};

// Each step draws a fresh batch; losses before and after are measured on a
// fixed probe batch drawn first from the same stream.
ReidTrainReport train_reid(visual::SiameseModel& model, int steps, int positives, int negatives,
                           double margin, const ad::GradientDescent& optimizer, Rng& rng);

}  // namespace airtrack::training
