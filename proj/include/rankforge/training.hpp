#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankforge/dataset.hpp"
#include "rankforge/metrics.hpp"
#include "rankforge/network.hpp"

namespace rankforge {

struct TrainConfig {
  std::size_t epochs = 30;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  double lr_init = 1e-2;
  double lr_decay = 0.1;
  // Epochs without a validation improvement before the learning rate decays.
  std::size_t plateau_patience = 10;
  std::size_t m = 10;
  std::uint64_t seed = 0;
  double dropout_p = 0.5;
  double validation_fraction = 0.1;
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 128;
  double hinge_margin = 1.0;
  // Baselines only: pick lr (and hinge margin) on validation SPC.
  bool grid_search = true;
};

struct LossBreakdown {
  double coarse = 0.0;
  double fine = 0.0;
  double total = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown train_loss;
  double val_spc = 0.0;
  bool improved = false;
  bool lr_decayed = false;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_spc = -std::numeric_limits<double>::infinity();
};

struct ValidationSplit {
  RankedDataset train;
  RankedDataset validation;  // empty when the set is too small to hold one out
};

// Deterministic hold-out of ceil(fraction * n) items (at least 2), ranks
// re-densified in both parts.
ValidationSplit split_validation(const RankedDataset& ds, double fraction, std::uint64_t seed);

// Shared optimizer loop for every model. A Model provides
//   Params init(const RankedDataset& train, RngStream& rng)
//   LossBreakdown gradient(const Params&, const RankedDataset& train,
//                          const std::vector<std::size_t>& batch, RngStream& dropout,
//                          Params& grad)       // grad starts zeroed
//   std::vector<double> scores(const Params&, const RankedDataset&)   // eval mode
//   Params zeros_like(const Params&)
//   std::vector<std::span<double>> blocks(Params&)
//   bool full_list() const     // one batch per epoch holding the whole set
template <class Model>
typename Model::Params run_training(Model& model, const RankedDataset& data, const TrainConfig& cfg,
                                    TrainLog& log) {
  using Params = typename Model::Params;
  if (data.size() < 2) throw std::invalid_argument("training needs at least 2 items");
  const RngStream root(cfg.seed, 0);
  ValidationSplit split = split_validation(data, cfg.validation_fraction, cfg.seed);
  const RankedDataset& train = split.train;

  RngStream init_rng = root.derive("init");
  RngStream batch_rng = root.derive("batching");
  RngStream dropout_rng = root.derive("dropout");

  Params params = model.init(train, init_rng);
  Params velocity = model.zeros_like(params);
  Params best = params;
  double lr = cfg.lr_init;
  std::size_t stale = 0;
  log = TrainLog{};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = model.full_list() ? train.size() : cfg.batch_size;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    batch_rng.shuffle(order);
    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      if (stop - start < 2) continue;  // a lone leftover item carries no pair
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      Params grad = model.zeros_like(params);
      const LossBreakdown loss = model.gradient(params, train, batch, dropout_rng, grad);
      if (!std::isfinite(loss.total)) {
        std::string ids;
        for (std::size_t i : batch) ids += (ids.empty() ? "" : ",") + train.items[i].id;
        throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                 " on batch [" + ids + "]");
      }
      auto p = model.blocks(params);
      auto g = model.blocks(grad);
      auto v = model.blocks(velocity);
      sgd_momentum_step(p, g, v, lr, cfg.momentum, cfg.weight_decay);
      sum.coarse += loss.coarse;
      sum.fine += loss.fine;
      sum.total += loss.total;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    if (batches > 0) {
      const double b = static_cast<double>(batches);
      entry.train_loss = {sum.coarse / b, sum.fine / b, sum.total / b};
    }
    const RankedDataset& monitor = split.validation.size() >= 2 ? split.validation : train;
    const auto scores = model.scores(params, monitor);
    const auto truth = monitor.ranks();
    entry.val_spc = spearman(truth, scores);
    if (entry.val_spc > log.best_val_spc) {
      log.best_val_spc = entry.val_spc;
      log.best_epoch = epoch;
      best = params;
      entry.improved = true;
      stale = 0;
    } else if (++stale >= cfg.plateau_patience) {
      lr *= cfg.lr_decay;
      stale = 0;
      entry.lr_decayed = true;
    }
    log.epochs.push_back(entry);
  }
  return best;
}

}  // namespace rankforge
