#include "rankforge/orbnet.hpp"

#include <cmath>
#include <stdexcept>

namespace rankforge {

namespace {

double sigmoid_slope(double x) {
  const double p = sigmoid(x);
  return p * (1.0 - p);
}

struct OrbNetModel {
  using Params = OrbNetParams;
  const TrainConfig& cfg;

  Params init(const RankedDataset& train, RngStream& rng) const {
    return init_orbnet(train.feature_dim, cfg.hidden1, cfg.hidden2,
                       EncodingConfig::make(train.size(), cfg.m), cfg.dropout_p, rng);
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
    return loss_and_gradient(params, X, ranks, masks, grad);
  }

  std::vector<double> scores(const Params& params, const RankedDataset& data) const {
    return predict_values(params, data);
  }

  Params zeros_like(const Params& p) const { return rankforge::zeros_like(p); }
  std::vector<std::span<double>> blocks(Params& p) const { return param_blocks(p); }
  bool full_list() const { return false; }
};

}  // namespace

OrbNetParams zero_orbnet(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         const EncodingConfig& enc, double dropout_p) {
  OrbNetParams p;
  p.trunk = {Dense(hidden1, d), Dense(hidden2, hidden1)};
  p.ordinal_weight.assign(hidden2, 0.0);
  p.ordinal_bias.assign(enc.thresholds(), 0.0);
  p.offset_head = Dense(1, hidden2 + enc.thresholds());
  p.dropout_p = dropout_p;
  p.enc = enc;
  return p;
}

OrbNetParams init_orbnet(std::size_t d, std::size_t hidden1, std::size_t hidden2,
                         const EncodingConfig& enc, double dropout_p, RngStream& rng) {
  OrbNetParams p = zero_orbnet(d, hidden1, hidden2, enc, dropout_p);
  p.trunk = Trunk::init(d, hidden1, hidden2, rng);
  Dense ordinal = Dense::fan_in_uniform(1, hidden2, rng);
  p.ordinal_weight = ordinal.weight.data;
  p.offset_head = Dense::fan_in_uniform(1, hidden2 + enc.thresholds(), rng);
  const std::size_t k = enc.thresholds();
  const double edge = std::log(static_cast<double>(enc.m - 1));
  for (std::size_t j = 0; j < k; ++j)
    p.ordinal_bias[j] = k == 1 ? 0.0 : edge - 2.0 * edge * static_cast<double>(j) / (k - 1.0);
  return p;
}

OrbNetParams zeros_like(const OrbNetParams& p) {
  return zero_orbnet(p.trunk.input_dim(), p.trunk.layer1.out(), p.trunk.layer2.out(), p.enc,
                     p.dropout_p);
}

std::vector<std::span<double>> param_blocks(OrbNetParams& p) {
  std::vector<std::span<double>> out;
  append_blocks(p.trunk, out);
  out.emplace_back(p.ordinal_weight);
  out.emplace_back(p.ordinal_bias);
  append_blocks(p.offset_head, out);
  return out;
}

void forward_batch(const OrbNetParams& params, const Mat& X, Mode mode, const DropoutMasks& masks,
                   OrbNetBatch& out) {
  trunk_forward(params.trunk, X, masks, out.trunk);
  const Mat& h = out.trunk.act2;
  const std::size_t k = params.enc.thresholds();
  const std::size_t hdim = h.cols;
  const CoarseMode coarse = mode == Mode::train ? CoarseMode::soft : CoarseMode::hard;

  out.logits = Mat(X.rows, k);
  out.s_bar.assign(X.rows, 0.0);
  out.s_tilde.assign(X.rows, 0.0);
  out.s.assign(X.rows, 0.0);
  const auto& v = params.offset_head.weight.data;
  for (std::size_t r = 0; r < X.rows; ++r) {
    const auto hr = h.row(r);
    const double shared = dot(params.ordinal_weight, hr);
    auto l = out.logits.row(r);
    for (std::size_t j = 0; j < k; ++j) l[j] = shared + params.ordinal_bias[j];
    out.s_bar[r] = coarse_score(l, params.enc, coarse);
    double st = params.offset_head.bias[0] + dot(std::span(v).first(hdim), hr);
    st += dot(std::span(v).subspan(hdim, k), l);
    out.s_tilde[r] = st;
    out.s[r] = final_score(out.s_bar[r], st, params.enc);
  }
}

ScoreTriple forward(const OrbNetParams& params, std::span<const double> features, Mode mode,
                    RngStream* mask_rng) {
  if (features.size() != params.feature_dim())
    throw std::invalid_argument("forward: expected " + std::to_string(params.feature_dim()) +
                                " features, got " + std::to_string(features.size()));
  if (mode == Mode::train && params.dropout_p > 0 && !mask_rng)
    throw std::invalid_argument("forward: train mode with dropout needs a mask stream");
  Mat X(1, features.size());
  std::copy(features.begin(), features.end(), X.data.begin());
  DropoutMasks masks;
  if (mask_rng && params.dropout_p > 0)
    masks = draw_masks(1, params.trunk.layer1.out(), params.trunk.layer2.out(), params.dropout_p,
                       *mask_rng);
  OrbNetBatch out;
  forward_batch(params, X, mode, masks, out);
  return {out.logits.data, out.s_bar[0], out.s_tilde[0], out.s[0]};
}

double loss_coarse(std::span<const double> logits, const OrdinalTarget& target, Vec* grad) {
  if (logits.size() != target.bits.size())
    throw std::invalid_argument("loss_coarse: logits and target lengths differ");
  double loss = 0.0;
  if (grad) grad->assign(logits.size(), 0.0);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    loss += bce_with_logit(logits[j], target.bits[j]);
    if (grad) (*grad)[j] = sigmoid(logits[j]) - target.bits[j];
  }
  return loss;
}

double loss_fine(std::span<const double> scores, std::span<const int> ranks, Vec* grad) {
  if (scores.size() != ranks.size())
    throw std::invalid_argument("loss_fine: scores and ranks lengths differ");
  const std::size_t b = scores.size();
  if (grad) grad->assign(b, 0.0);
  if (b < 2) return 0.0;
  const double pairs = static_cast<double>(b) * static_cast<double>(b - 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      const double diff = scores[i] - scores[j];
      const double p = pairwise_target(ranks[i], ranks[j]);
      loss += bce_with_logit(diff, p);
      if (grad) {
        const double g = (sigmoid(diff) - p) / pairs;
        (*grad)[i] += g;
        (*grad)[j] -= g;
      }
    }
  }
  return loss / pairs;
}

LossBreakdown loss_and_gradient(const OrbNetParams& params, const Mat& X,
                                std::span<const int> ranks, const DropoutMasks& masks,
                                OrbNetParams& grad) {
  if (ranks.size() != X.rows) throw std::invalid_argument("loss_and_gradient: ranks/rows mismatch");
  OrbNetBatch fwd;
  forward_batch(params, X, Mode::train, masks, fwd);

  const std::size_t batch = X.rows;
  const std::size_t k = params.enc.thresholds();
  const std::size_t hdim = params.trunk.output_dim();
  const double tau = params.enc.tau;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  LossBreakdown loss;
  Mat g_logits(batch, k);
  Vec g_l;
  for (std::size_t r = 0; r < batch; ++r) {
    const auto target = encode_ordinal(ranks[r], params.enc);
    loss.coarse += loss_coarse(fwd.logits.row(r), target, &g_l) * inv_batch;
    for (std::size_t j = 0; j < k; ++j) g_logits(r, j) = g_l[j] * inv_batch;
  }
  // The pairwise loss sees scores on the normalized s / n scale.
  const double inv_n = 1.0 / static_cast<double>(params.enc.n);
  Vec normalized = fwd.s;
  for (double& s : normalized) s *= inv_n;
  Vec g_s;
  loss.fine = loss_fine(normalized, ranks, &g_s);
  for (double& g : g_s) g *= inv_n;
  loss.total = loss.coarse + loss.fine;

  const auto& v = params.offset_head.weight.data;
  auto& gv = grad.offset_head.weight.data;
  Mat g_h(batch, hdim);
  for (std::size_t r = 0; r < batch; ++r) {
    const auto h = fwd.trunk.act2.row(r);
    const auto l = fwd.logits.row(r);
    auto gl = g_logits.row(r);
    auto gh = g_h.row(r);

    // s = tau * sum sigmoid(l) + tau * sigmoid(s_tilde)
    const double g_st = g_s[r] * tau * sigmoid_slope(fwd.s_tilde[r]);
    for (std::size_t j = 0; j < k; ++j) gl[j] += g_s[r] * tau * sigmoid_slope(l[j]);

    // s_tilde = v . [h, l] + e
    grad.offset_head.bias[0] += g_st;
    for (std::size_t i = 0; i < hdim; ++i) {
      gv[i] += g_st * h[i];
      gh[i] += g_st * v[i];
    }
    for (std::size_t j = 0; j < k; ++j) {
      gv[hdim + j] += g_st * l[j];
      gl[j] += g_st * v[hdim + j];
    }

    // l_j = w . h + c_j
    double gl_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      grad.ordinal_bias[j] += gl[j];
      gl_sum += gl[j];
    }
    for (std::size_t i = 0; i < hdim; ++i) {
      grad.ordinal_weight[i] += gl_sum * h[i];
      gh[i] += gl_sum * params.ordinal_weight[i];
    }
  }
  trunk_backward(params.trunk, fwd.trunk, g_h, grad.trunk);
  return loss;
}

LossBreakdown train_step(OrbNetParams& params, OrbNetParams& velocity, const Mat& X,
                         std::span<const int> ranks, const TrainConfig& cfg, double lr,
                         RngStream& rng) {
  DropoutMasks masks;
  if (params.dropout_p > 0)
    masks = draw_masks(X.rows, params.trunk.layer1.out(), params.trunk.layer2.out(),
                       params.dropout_p, rng);
  OrbNetParams grad = zeros_like(params);
  const LossBreakdown loss = loss_and_gradient(params, X, ranks, masks, grad);
  if (!std::isfinite(loss.total)) throw std::runtime_error("train_step: non-finite loss");
  auto p = param_blocks(params);
  auto g = param_blocks(grad);
  auto v = param_blocks(velocity);
  sgd_momentum_step(p, g, v, lr, cfg.momentum, cfg.weight_decay);
  return loss;
}

OrbNetTrainResult train_orbnet(const RankedDataset& data, const TrainConfig& cfg) {
  OrbNetModel model{cfg};
  OrbNetTrainResult result;
  result.params = run_training(model, data, cfg, result.log);
  return result;
}

std::vector<double> predict_values(const OrbNetParams& params, const RankedDataset& data) {
  if (data.feature_dim != params.feature_dim())
    throw std::invalid_argument("predict: dataset has " + std::to_string(data.feature_dim) +
                                " features, model expects " + std::to_string(params.feature_dim()));
  std::vector<const Vec*> rows;
  for (const auto& it : data.items) rows.push_back(&it.features);
  OrbNetBatch out;
  forward_batch(params, stack_rows(rows, data.feature_dim), Mode::eval, {}, out);
  const double n = static_cast<double>(params.enc.n);
  for (double& s : out.s) s /= n;
  return out.s;
}

std::vector<ScoredItem> predict_scores(const OrbNetParams& params, const RankedDataset& data) {
  const auto values = predict_values(params, data);
  std::vector<ScoredItem> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({data.items[i].id, values[i]});
  return out;
}

}  // namespace rankforge
