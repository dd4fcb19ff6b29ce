#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "rankforge/orbnet.hpp"
#include "toy.hpp"

using namespace rankforge;

namespace {

OrbNetParams toy_params(RngStream& rng, double dropout_p = 0.0, std::size_t n = 12) {
  return init_orbnet(5, 8, 6, EncodingConfig::make(n, 3), dropout_p, rng);
}

// Random biases too, so the check does not depend on the initial spacing.
void perturb(OrbNetParams& p, RngStream& rng) {
  for (auto block : param_blocks(p))
    for (double& v : block) v += rng.uniform(-0.3, 0.3);
}

}  // namespace

TEST(OrbNetLoss, CoarseExamples) {
  const auto cfg = EncodingConfig::make(10, 5);
  const auto target = encode_ordinal(7, cfg);
  Vec grad;
  EXPECT_NEAR(loss_coarse(Vec(4, 0.0), target, &grad), 4 * std::log(2.0), 1e-15);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(grad[j], 0.5 - target.bits[j]);
  EXPECT_LT(loss_coarse(Vec{40, 40, 40, -40}, target), 1e-15);
  EXPECT_THROW(loss_coarse(Vec(3, 0.0), target), std::invalid_argument);
}

TEST(OrbNetLoss, FineExamples) {
  EXPECT_NEAR(loss_fine(Vec{0.3, 0.3}, std::vector<int>{1, 2}), std::log(2.0), 1e-15);
  EXPECT_LT(loss_fine(Vec{60, 0}, std::vector<int>{2, 1}), 1e-20);
  EXPECT_EQ(loss_fine(Vec{1.0}, std::vector<int>{1}), 0.0);
  RngStream rng(3, 0);
  for (int t = 0; t < 20; ++t) {
    Vec s{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<int> y{3, 1, 2};
    const double before = loss_fine(s, y);
    std::swap(s[0], s[2]);
    std::swap(y[0], y[2]);
    EXPECT_NEAR(loss_fine(s, y), before, 1e-15);
  }
}

TEST(OrbNetLoss, FineGradientMatchesFiniteDifferences) {
  RngStream rng(5, 0);
  const std::vector<int> y{4, 1, 3, 2};
  const Vec s0{0.2, -0.4, 1.1, 0.05};
  Vec grad;
  loss_fine(s0, y, &grad);
  const Vec num = finite_diff_gradient([&](std::span<const double> s) { return loss_fine(s, y); }, s0, 1e-6);
  EXPECT_LE(gradcheck::relative_error(grad, num), 1e-8);
}

TEST(OrbNetGradient, MatchesFiniteDifferencesOnToys) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double p : {0.0, 0.5}) {
      RngStream rng(seed, 1);
      OrbNetParams params = toy_params(rng, p);
      perturb(params, rng);
      const Mat X = toy::features(4, 5, rng);
      const auto ranks = toy::ranks(4, 12, rng);
      DropoutMasks masks;
      if (p > 0) masks = draw_masks(4, 8, 6, p, rng);

      OrbNetParams grad = zeros_like(params);
      const LossBreakdown loss = loss_and_gradient(params, X, ranks, masks, grad);
      EXPECT_EQ(loss.total, loss.coarse + loss.fine);
      const double err = gradcheck::gradient_error(
          params, grad, [](OrbNetParams& q) { return param_blocks(q); },
          [&](const OrbNetParams& q) {
            OrbNetParams scratch = zeros_like(q);
            return loss_and_gradient(q, X, ranks, masks, scratch).total;
          });
      EXPECT_LE(err, 1e-5) << "seed " << seed << " p " << p;
    }
  }
}

TEST(OrbNetStructure, ThresholdProbabilitiesFollowBiases) {
  RngStream rng(77, 0);
  for (int trial = 0; trial < 200; ++trial) {
    OrbNetParams params = init_orbnet(5, 8, 6, EncodingConfig::make(40, 8), 0.0, rng);
    for (double& b : params.ordinal_bias) b = rng.uniform(-3, 3);
    for (double& w : params.ordinal_weight) w = rng.uniform(-1, 1);
    const Mat X = toy::features(1, 5, rng);
    const ScoreTriple t = forward(params, X.row(0), Mode::eval);
    for (std::size_t i = 0; i < t.logits.size(); ++i)
      for (std::size_t j = 0; j < t.logits.size(); ++j)
        if (params.ordinal_bias[i] > params.ordinal_bias[j]) {
          ASSERT_GT(t.logits[i], t.logits[j]);
          ASSERT_GE(sigmoid(t.logits[i]), sigmoid(t.logits[j]));
        }
  }
}

TEST(OrbNetStructure, InitialBiasesDescend) {
  RngStream rng(1, 0);
  const OrbNetParams p = init_orbnet(5, 8, 6, EncodingConfig::make(100, 10), 0.5, rng);
  ASSERT_EQ(p.ordinal_bias.size(), 9u);
  EXPECT_NEAR(p.ordinal_bias.front(), std::log(9.0), 1e-15);
  EXPECT_NEAR(p.ordinal_bias.back(), -std::log(9.0), 1e-15);
  for (std::size_t j = 1; j < 9; ++j) EXPECT_LT(p.ordinal_bias[j], p.ordinal_bias[j - 1]);
  EXPECT_EQ(p.offset_head.in(), 6u + 9u);
}

TEST(OrbNetForward, OffsetStaysInsideBin) {
  RngStream rng(99, 0);
  for (int trial = 0; trial < 300; ++trial) {
    OrbNetParams params = toy_params(rng, 0.5, 30);
    perturb(params, rng);
    for (double& v : params.offset_head.weight.data) v *= 20;  // push s_tilde to saturation
    const Mat X = toy::features(1, 5, rng);
    RngStream mask = rng.derive("mask");
    for (Mode mode : {Mode::train, Mode::eval}) {
      const ScoreTriple t = forward(params, X.row(0), mode, &mask);
      ASSERT_GT(t.s - t.s_bar, 0.0);
      ASSERT_LT(t.s - t.s_bar, params.enc.tau);
    }
  }
}

TEST(OrbNetForward, EvalUsesHardCoarseScore) {
  RngStream rng(4, 0);
  const OrbNetParams params = toy_params(rng, 0.0, 30);
  const Mat X = toy::features(1, 5, rng);
  const ScoreTriple t = forward(params, X.row(0), Mode::eval);
  double positive = 0;
  for (double l : t.logits) positive += l > 0 ? 1 : 0;
  EXPECT_EQ(t.s_bar, params.enc.tau * positive);
  EXPECT_THROW(forward(toy_params(rng, 0.5), X.row(0), Mode::train), std::invalid_argument);
  EXPECT_THROW(forward(params, Vec(4, 0.0), Mode::eval), std::invalid_argument);
}

TEST(OrbNetTrainStep, ZeroLearningRateLeavesParams) {
  RngStream rng(2, 0);
  OrbNetParams params = toy_params(rng, 0.5);
  const OrbNetParams before = params;
  OrbNetParams velocity = zeros_like(params);
  TrainConfig cfg;
  const Mat X = toy::features(4, 5, rng);
  train_step(params, velocity, X, toy::ranks(4, 12, rng), cfg, 0.0, rng);
  EXPECT_EQ(params, before);
}

TEST(OrbNetTrainStep, WeightDecayAloneShrinks) {
  RngStream rng(2, 0);
  OrbNetParams params = toy_params(rng);
  OrbNetParams zero_grad = zeros_like(params);
  OrbNetParams velocity = zeros_like(params);
  auto norm = [](OrbNetParams& p) {
    double s = 0;
    for (auto b : param_blocks(p))
      for (double v : b) s += v * v;
    return s;
  };
  const double before = norm(params);
  auto p = param_blocks(params);
  auto g = param_blocks(zero_grad);
  auto v = param_blocks(velocity);
  sgd_momentum_step(p, g, v, 0.1, 0.9, 1e-2);
  EXPECT_LT(norm(params), before);
}

TEST(OrbNetTrainStep, SgdMomentumFormula) {
  Vec w{1.0, -2.0}, g{0.5, 0.25}, v{0.1, 0.0};
  std::vector<std::span<double>> P{w}, G{g}, V{v};
  sgd_momentum_step(P, G, V, 0.1, 0.9, 0.01);
  const double v0 = 0.9 * 0.1 + (0.5 + 0.01 * 1.0), v1 = 0.25 + 0.01 * -2.0;
  EXPECT_DOUBLE_EQ(v[0], v0);
  EXPECT_DOUBLE_EQ(v[1], v1);
  EXPECT_DOUBLE_EQ(w[0], 1.0 - 0.1 * v0);
  EXPECT_DOUBLE_EQ(w[1], -2.0 - 0.1 * v1);
}

TEST(OrbNetTrain, DeterministicAndLearnsLinearSet) {
  const RankedDataset data = toy::dataset(120, 16, 3);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.hidden1 = 64;
  cfg.hidden2 = 32;
  cfg.seed = 11;
  const auto a = train_orbnet(data, cfg);
  const auto b = train_orbnet(data, cfg);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.log.epochs.size(), 15u);
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) EXPECT_EQ(a.log.epochs[e].epoch, e + 1);
  EXPECT_GE(a.log.best_val_spc, 0.9);
  EXPECT_GE(spearman(data.ranks(), predict_values(a.params, data)), 0.9);
}

TEST(OrbNetPredict, RangeDeterminismAndOrderInvariance) {
  const RankedDataset data = toy::dataset(60, 8, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden1 = 16;
  cfg.hidden2 = 8;
  const auto model = train_orbnet(data, cfg).params;
  const auto scores = predict_scores(model, data);
  ASSERT_EQ(scores.size(), data.size());
  for (const auto& s : scores) {
    EXPECT_GT(s.score, 0.0);
    EXPECT_LE(s.score, 1.0);
  }
  EXPECT_EQ(predict_values(model, data), predict_values(model, data));

  RankedDataset reversed = data;
  std::reverse(reversed.items.begin(), reversed.items.end());
  const auto r = predict_scores(model, reversed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(r[data.size() - 1 - i].id, scores[i].id);
    EXPECT_EQ(r[data.size() - 1 - i].score, scores[i].score);
  }

  RankedDataset wrong = data;
  wrong.feature_dim = 9;
  for (auto& it : wrong.items) it.features.push_back(0);
  EXPECT_THROW(predict_scores(model, wrong), std::invalid_argument);
}

TEST(OrbNetTrain, NonFiniteLossReportsBatchIds) {
  RankedDataset data = toy::dataset(40, 4, 2);
  data.items[5].features[0] = 1e308;
  data.items[6].features[0] = -1e308;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden1 = 8;
  cfg.hidden2 = 4;
  cfg.dropout_p = 0;
  cfg.lr_init = 1e300;
  try {
    train_orbnet(data, cfg);
    FAIL() << "expected a non-finite loss";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("item"), std::string::npos) << e.what();
  }
}
