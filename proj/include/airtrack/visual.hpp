// Visual signature comparators: sum of squared differences and a Siamese
// embedding network.
//
// The Siamese network is backbone (three stride-2 conv blocks) -> neck (1x1
// projection) -> decoder (one global spatial sigmoid gate) -> head (H spatial
// softmax maps, each pooling the grid into a sub-embedding that is projected
// to head_dim). With attention disabled the decoder and head are replaced by
// flatten + linear.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "airtrack/autodiff.hpp"
#include "airtrack/core.hpp"
#include "airtrack/nn.hpp"

namespace airtrack::visual {

// Sum over pixels and channels of (a - b)^2. Sizes must already match.
double ssd_distance(const Chip& a, const Chip& b);

struct SiameseConfig {
  int chip_size = 64;  // RGB input side
  int channels1 = 16;
  int channels2 = 32;
  int channels3 = 32;  // backbone output channels C
  int neck_dim = 32;   // D
  int heads = 4;       // H
  int head_dim = 8;
  bool attention_enabled = true;

  int grid_size() const { return chip_size / 8; }
  int embedding_dim() const { return heads * head_dim; }
  void validate() const;
};

struct Embedding {
  Eigen::VectorXd values;
  int head_count = 0;
};

struct AttentionMaps {
  int grid_height = 0;
  int grid_width = 0;
  std::vector<Eigen::MatrixXd> maps;  // grid_height x grid_width, each sums to 1
};

class SiameseModel {
 public:
  SiameseModel(const SiameseConfig& config, std::uint64_t seed);

  const SiameseConfig& config() const { return config_; }
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  struct Forward {
    ad::Var embedding;             // e x 1
    ad::Var grid;                  // D x (grid cells), after the decoder gate
    ad::Var weights;               // H x (grid cells) softmax maps; invalid when disabled
  };
  Forward forward(ad::Tape& tape, const Chip& chip) const;

  // Pools a gated feature grid with the given per-head weights (H x cells).
  ad::Var pool(ad::Tape& tape, ad::Var grid, ad::Var weights) const;

  // Sets the head attention logits to zero so every map is uniform.
  void zero_attention_logits();

 private:
  SiameseConfig config_;
  nn::Conv2d conv1_;
  nn::Conv2d conv2_;
  nn::Conv2d conv3_;
  nn::Linear neck_;
  nn::Linear gate_;              // 1 x D
  nn::Linear head_logits_;       // H x D
  std::vector<nn::Linear> head_proj_;
  nn::Linear flat_proj_;         // attention disabled
};

// Resizes to the model input size; grayscale chips are replicated to RGB.
Chip prepare_chip(const SiameseConfig& config, const Chip& chip);

// Throws DimensionMismatch unless the chip matches the model input.
Embedding embed(const SiameseModel& model, const Chip& chip);

double embedding_distance(const Embedding& a, const Embedding& b);

// Throws AttentionDisabled for the flatten + linear variant.
AttentionMaps attention_maps(const SiameseModel& model, const Chip& chip);

// Gated feature grid (D x cells) from the same forward pass as embed.
Eigen::MatrixXd feature_grid(const SiameseModel& model, const Chip& chip);

// Embedding obtained by pooling `grid` with the given maps.
Embedding pool_with_maps(const SiameseModel& model, const Eigen::MatrixXd& grid,
                         const AttentionMaps& maps);

// Embedding obtained with uniform maps (global mean pooling).
Embedding mean_pooled_embedding(const SiameseModel& model, const Chip& chip);

struct ChipPair {
  Chip a;
  Chip b;
  bool same = false;
};

// Mean over pairs of same * d^2 + (1 - same) * max(0, margin - d)^2.
ad::Var contrastive_loss(ad::Tape& tape, const SiameseModel& model, std::span<const ChipPair> pairs,
                         double margin);
double contrastive_loss_value(const SiameseModel& model, std::span<const ChipPair> pairs,
                              double margin);

// Returns the pre-update loss. Throws InvalidArgument without a positive and
// a negative pair, NonFiniteLoss without touching the parameters.
double contrastive_train_step(SiameseModel& model, std::span<const ChipPair> pairs, double margin,
                              const ad::GradientDescent& optimizer);

double gradient_check(SiameseModel& model, std::span<const ChipPair> pairs, double margin,
                      double eps, int samples, std::uint64_t seed);

struct LabeledChip {
  Chip chip;
  int identity = 0;
};

struct ReidResult {
  double rank1 = 0.0;
  double mean_ap = 0.0;
};

// distances(q, g) for each query q and gallery item g. Ties in distance are
// ranked by gallery index.
ReidResult evaluate_reid(const Eigen::MatrixXd& distances, std::span<const int> query_ids,
                         std::span<const int> gallery_ids);
ReidResult evaluate_reid(const SiameseModel& model, std::span<const LabeledChip> queries,
                         std::span<const LabeledChip> gallery);

}  // namespace airtrack::visual
