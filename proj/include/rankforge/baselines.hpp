#pragma once

#include <span>
#include <string>
#include <vector>

#include "rankforge/dataset.hpp"
#include "rankforge/network.hpp"
#include "rankforge/training.hpp"

namespace rankforge {

enum class Method { orbnet, ranknet, hinge, listnet_local, listnet_global, regression };

std::string method_name(Method m);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

// Single-output scorer d -> hidden1 -> hidden2 -> 1 shared by all baselines.
struct ScorerParams {
  Trunk trunk;
  Dense head;
  double dropout_p = 0.0;
  // Training-set size; percentile targets are rank / n_train.
  std::size_t n_train = 0;

  std::size_t feature_dim() const { return trunk.input_dim(); }
  bool operator==(const ScorerParams&) const = default;
};

ScorerParams init_scorer(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         std::size_t n_train, double dropout_p, RngStream& rng);
ScorerParams zeros_like(const ScorerParams& p);
std::vector<std::span<double>> param_blocks(ScorerParams& p);

// Scores for the rows of X; dropout iff masks enabled. `cache` is filled for backprop.
Vec scorer_forward(const ScorerParams& p, const Mat& X, const DropoutMasks& masks, TrunkCache& cache);
// Accumulates parameter gradients from dLoss/dscore.
void scorer_backward(const ScorerParams& p, const TrunkCache& cache, std::span<const double> g_scores,
                     ScorerParams& grad);

// Pairwise logistic loss, identical to ORBNet's fine loss.
double ranknet_loss(std::span<const double> scores, std::span<const int> ranks, Vec* grad = nullptr);
// Mean over pairs with y_i > y_j of max(0, margin - (s_i - s_j)); the
// subgradient at the kink is 0.
double hinge_loss(std::span<const double> scores, std::span<const int> ranks, double margin,
                  Vec* grad = nullptr);
// Top-1 ListNet: cross-entropy of softmax(scores) against softmax(rank / n).
double listnet_loss(std::span<const double> scores, std::span<const int> ranks, std::size_t n,
                    Vec* grad = nullptr);
// Mean |s - rank / n|; subgradient 0 where the residual is exactly 0.
double l1_regression_loss(std::span<const double> scores, std::span<const int> ranks,
                          std::size_t n, Vec* grad = nullptr);

// Loss of `method` on a batch of scores and its gradient w.r.t. them.
double baseline_loss(Method method, std::span<const double> scores, std::span<const int> ranks,
                     std::size_t n, double margin, Vec* grad);

struct BaselineTrainResult {
  ScorerParams params;
  TrainLog log;
  double lr = 0.0;
  double margin = 0.0;
};

// Trains with the shared optimizer loop. With cfg.grid_search, tries
// lr in {1e-2, 1e-3} (and margin in {0.5, 1} for hinge) and keeps the best
// validation SPC.
BaselineTrainResult train_baseline(Method method, const RankedDataset& data, const TrainConfig& cfg);

std::vector<double> scorer_predict(const ScorerParams& p, const RankedDataset& data);

}  // namespace rankforge
