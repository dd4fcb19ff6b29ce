#pragma once

#include <span>
#include <string>
#include <vector>

#include "rankforge/dataset.hpp"
#include "rankforge/network.hpp"
#include "rankforge/ranking_core.hpp"
#include "rankforge/training.hpp"

namespace rankforge {

// Coarse-to-fine ranker. A shared trunk feeds
//   * an ordinal head: one weight vector shared by all m-1 thresholds plus
//     one bias per threshold, giving logits l, and
//   * an offset head reading concat(trunk output, l), giving s_tilde.
// Score s = coarse(l) + tau * sigmoid(s_tilde).
struct OrbNetParams {
  Trunk trunk;
  Vec ordinal_weight;
  Vec ordinal_bias;
  Dense offset_head;
  double dropout_p = 0.0;
  EncodingConfig enc;

  std::size_t feature_dim() const { return trunk.input_dim(); }
  bool operator==(const OrbNetParams&) const = default;
};

// All-zero parameters with the given shape.
OrbNetParams zero_orbnet(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         const EncodingConfig& enc, double dropout_p);
// Fan-in uniform weights, zero biases, ordinal biases evenly spaced from
// +log(m-1) down to -log(m-1).
OrbNetParams init_orbnet(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         const EncodingConfig& enc, double dropout_p, RngStream& rng);
OrbNetParams zeros_like(const OrbNetParams& p);
// trunk, ordinal weight, ordinal biases, offset weight, offset bias.
std::vector<std::span<double>> param_blocks(OrbNetParams& p);

enum class Mode { train, eval };

struct ScoreTriple {
  Vec logits;
  double s_bar = 0;
  double s_tilde = 0;
  double s = 0;
};

struct OrbNetBatch {
  TrunkCache trunk;
  Mat logits;
  Vec s_bar, s_tilde, s;
};

// Train mode uses the soft coarse score, eval mode the hard one. Dropout is
// applied iff `masks` is enabled.
void forward_batch(const OrbNetParams& params, const Mat& X, Mode mode, const DropoutMasks& masks,
                   OrbNetBatch& out);

// Single item. Dropout is active when dropout_p > 0 and a mask stream is
// given; train mode with dropout_p > 0 requires one.
ScoreTriple forward(const OrbNetParams& params, std::span<const double> features, Mode mode,
                    RngStream* mask_rng = nullptr);

// Sum over thresholds of logistic loss; optional gradient w.r.t. logits.
double loss_coarse(std::span<const double> logits, const OrdinalTarget& target,
                   Vec* grad = nullptr);
// Mean over ordered pairs (i != j) of logistic loss of s_i - s_j against
// pairwise_target. Optional gradient w.r.t. scores. Zero for fewer than 2.
double loss_fine(std::span<const double> scores, std::span<const int> ranks, Vec* grad = nullptr);

// Batch loss and its exact gradient accumulated into `grad`: loss_coarse
// averaged over samples plus loss_fine of the normalized scores s / n.
// Ranks index 1..params.enc.n.
LossBreakdown loss_and_gradient(const OrbNetParams& params, const Mat& X,
                                std::span<const int> ranks, const DropoutMasks& masks,
                                OrbNetParams& grad);

// One SGD-with-momentum update; dropout masks come from `rng`.
LossBreakdown train_step(OrbNetParams& params, OrbNetParams& velocity, const Mat& X,
                         std::span<const int> ranks, const TrainConfig& cfg, double lr,
                         RngStream& rng);

struct OrbNetTrainResult {
  OrbNetParams params;
  TrainLog log;
};

OrbNetTrainResult train_orbnet(const RankedDataset& data, const TrainConfig& cfg);

struct ScoredItem {
  std::string id;
  double score = 0;
};

// Eval-mode scores s / n in (0, 1), dropout off.
std::vector<ScoredItem> predict_scores(const OrbNetParams& params, const RankedDataset& data);
std::vector<double> predict_values(const OrbNetParams& params, const RankedDataset& data);

}  // namespace rankforge
