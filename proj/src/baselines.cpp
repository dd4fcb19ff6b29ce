#include "rankforge/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rankforge/orbnet.hpp"

namespace rankforge {

std::string method_name(Method m) {
  switch (m) {
    case Method::orbnet: return "orbnet";
    case Method::ranknet: return "ranknet";
    case Method::hinge: return "hinge";
    case Method::listnet_local: return "listnet-local";
    case Method::listnet_global: return "listnet-global";
    case Method::regression: return "regression";
  }
  return "orbnet";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::orbnet,        Method::ranknet,
                                              Method::hinge,         Method::listnet_local,
                                              Method::listnet_global, Method::regression};
  return methods;
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (method_name(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "'");
}

ScorerParams init_scorer(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         std::size_t n_train, double dropout_p, RngStream& rng) {
  ScorerParams p;
  p.trunk = Trunk::init(d, hidden1, hidden2, rng);
  p.head = Dense::fan_in_uniform(1, hidden2, rng);
  p.dropout_p = dropout_p;
  p.n_train = n_train;
  return p;
}

ScorerParams zeros_like(const ScorerParams& p) {
  return {p.trunk.zeros_like(), Dense(1, p.head.in()), p.dropout_p, p.n_train};
}

std::vector<std::span<double>> param_blocks(ScorerParams& p) {
  std::vector<std::span<double>> out;
  append_blocks(p.trunk, out);
  append_blocks(p.head, out);
  return out;
}

Vec scorer_forward(const ScorerParams& p, const Mat& X, const DropoutMasks& masks, TrunkCache& cache) {
  trunk_forward(p.trunk, X, masks, cache);
  Vec s(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r)
    s[r] = dot(p.head.weight.data, cache.act2.row(r)) + p.head.bias[0];
  return s;
}

void scorer_backward(const ScorerParams& p, const TrunkCache& cache, std::span<const double> g_scores,
                     ScorerParams& grad) {
  const Mat& h = cache.act2;
  Mat g_h(h.rows, h.cols);
  for (std::size_t r = 0; r < h.rows; ++r) {
    const double g = g_scores[r];
    grad.head.bias[0] += g;
    for (std::size_t i = 0; i < h.cols; ++i) {
      grad.head.weight.data[i] += g * h(r, i);
      g_h(r, i) = g * p.head.weight.data[i];
    }
  }
  trunk_backward(p.trunk, cache, g_h, grad.trunk);
}

double ranknet_loss(std::span<const double> scores, std::span<const int> ranks, Vec* grad) {
  return loss_fine(scores, ranks, grad);
}

double hinge_loss(std::span<const double> scores, std::span<const int> ranks, double margin,
                  Vec* grad) {
  if (scores.size() != ranks.size()) throw std::invalid_argument("hinge_loss: length mismatch");
  if (grad) grad->assign(scores.size(), 0.0);
  double loss = 0.0;
  std::size_t pairs = 0;
  std::vector<std::pair<std::size_t, std::size_t>> active;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (ranks[i] <= ranks[j]) continue;
      ++pairs;
      const double slack = margin - (scores[i] - scores[j]);
      if (slack > 0.0) {
        loss += slack;
        active.emplace_back(i, j);
      }
    }
  }
  if (pairs == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(pairs);
  if (grad)
    for (auto [i, j] : active) {
      (*grad)[i] -= inv;
      (*grad)[j] += inv;
    }
  return loss * inv;
}

namespace {

Vec softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  Vec e(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += e[i] = std::exp(x[i] - mx);
  for (double& v : e) v /= sum;
  return e;
}

double log_sum_exp(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

}  // namespace

double listnet_loss(std::span<const double> scores, std::span<const int> ranks, std::size_t n,
                    Vec* grad) {
  if (scores.size() != ranks.size()) throw std::invalid_argument("listnet_loss: length mismatch");
  if (scores.empty()) throw std::invalid_argument("listnet_loss: empty list");
  Vec utility(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) utility[i] = percentile_rank(ranks[i], n);
  const Vec target = softmax(utility);
  const double lse = log_sum_exp(scores);
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) loss -= target[i] * (scores[i] - lse);
  if (grad) {
    const Vec pred = softmax(scores);
    grad->resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) (*grad)[i] = pred[i] - target[i];
  }
  return loss;
}

double l1_regression_loss(std::span<const double> scores, std::span<const int> ranks,
                          std::size_t n, Vec* grad) {
  if (scores.size() != ranks.size())
    throw std::invalid_argument("l1_regression_loss: length mismatch");
  if (scores.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(scores.size());
  if (grad) grad->assign(scores.size(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = scores[i] - percentile_rank(ranks[i], n);
    loss += std::abs(r);
    if (grad) (*grad)[i] = r > 0 ? inv : (r < 0 ? -inv : 0.0);
  }
  return loss * inv;
}

double baseline_loss(Method method, std::span<const double> scores, std::span<const int> ranks,
                     std::size_t n, double margin, Vec* grad) {
  switch (method) {
    case Method::ranknet: return ranknet_loss(scores, ranks, grad);
    case Method::hinge: return hinge_loss(scores, ranks, margin, grad);
    case Method::listnet_local:
    case Method::listnet_global: return listnet_loss(scores, ranks, n, grad);
    case Method::regression: return l1_regression_loss(scores, ranks, n, grad);
    case Method::orbnet: break;
  }
  throw std::invalid_argument("baseline_loss: orbnet is not a baseline");
}

namespace {

struct BaselineModel {
  using Params = ScorerParams;
  Method method;
  const TrainConfig& cfg;
  double margin;

  Params init(const RankedDataset& train, RngStream& rng) const {
    return init_scorer(train.feature_dim, cfg.hidden1, cfg.hidden2, train.size(), cfg.dropout_p, rng);
  }

  LossBreakdown gradient(const Params& params, const RankedDataset& train,
                         const std::vector<std::size_t>& batch, RngStream& dropout, Params& grad) const {
    std::vector<const Vec*> rows;
    std::vector<int> ranks;
    for (std::size_t i : batch) {
      rows.push_back(&train.items[i].features);
      ranks.push_back(train.items[i].rank);
    }
    const Mat X = stack_rows(rows, train.feature_dim);
    DropoutMasks masks;
    if (params.dropout_p > 0)
      masks = draw_masks(X.rows, params.trunk.layer1.out(), params.trunk.layer2.out(),
                         params.dropout_p, dropout);
    TrunkCache cache;
    const Vec s = scorer_forward(params, X, masks, cache);
    Vec g;
    const double loss = baseline_loss(method, s, ranks, params.n_train, margin, &g);
    scorer_backward(params, cache, g, grad);
    return {0.0, loss, loss};
  }

  std::vector<double> scores(const Params& params, const RankedDataset& data) const {
    return scorer_predict(params, data);
  }

  Params zeros_like(const Params& p) const { return rankforge::zeros_like(p); }
  std::vector<std::span<double>> blocks(Params& p) const { return param_blocks(p); }
  bool full_list() const { return method == Method::listnet_global; }
};

}  // namespace

BaselineTrainResult train_baseline(Method method, const RankedDataset& data, const TrainConfig& cfg) {
  if (method == Method::orbnet) throw std::invalid_argument("train_baseline: orbnet is not a baseline");
  std::vector<double> lrs{cfg.lr_init};
  std::vector<double> margins{cfg.hinge_margin};
  if (cfg.grid_search) {
    lrs = {1e-2, 1e-3};
    if (method == Method::hinge) margins = {0.5, 1.0};
  }
  BaselineTrainResult best;
  bool have = false;
  for (double lr : lrs) {
    for (double margin : margins) {
      TrainConfig trial = cfg;
      trial.lr_init = lr;
      trial.hinge_margin = margin;
      BaselineModel model{method, trial, margin};
      BaselineTrainResult r;
      r.params = run_training(model, data, trial, r.log);
      r.lr = lr;
      r.margin = margin;
      if (!have || r.log.best_val_spc > best.log.best_val_spc) {
        best = std::move(r);
        have = true;
      }
    }
  }
  return best;
}

std::vector<double> scorer_predict(const ScorerParams& p, const RankedDataset& data) {
  if (data.feature_dim != p.feature_dim())
    throw std::invalid_argument("predict: dataset has " + std::to_string(data.feature_dim) +
                                " features, model expects " + std::to_string(p.feature_dim()));
  std::vector<const Vec*> rows;
  for (const auto& it : data.items) rows.push_back(&it.features);
  TrunkCache cache;
  return scorer_forward(p, stack_rows(rows, data.feature_dim), {}, cache);
}

}  // namespace rankforge
