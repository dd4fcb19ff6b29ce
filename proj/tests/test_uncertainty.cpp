#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rankforge/uncertainty.hpp"
#include "toy.hpp"

using namespace rankforge;

namespace {

OrbNetParams trained_model() {
  static const OrbNetParams params = [] {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.hidden1 = 32;
    cfg.hidden2 = 16;
    return train_orbnet(toy::dataset(80, 8, 1), cfg).params;
  }();
  return params;
}

}  // namespace

TEST(McConfidence, NoDropoutIsDeterministic) {
  const auto params = trained_model();
  const auto data = toy::dataset(80, 8, 1);
  const auto s = predict_values(params, data);
  const std::size_t hi = std::max_element(s.begin(), s.end()) - s.begin();
  const std::size_t lo = std::min_element(s.begin(), s.end()) - s.begin();
  for (std::size_t passes : {1u, 7u, 10u}) {
    EXPECT_EQ(mc_pairwise_confidence(params, data.items[hi].features, data.items[lo].features,
                                     passes, 0.0, 3).confidence,
              1.0);
  }
}

TEST(McConfidence, IdenticalItemsScoreHalf) {
  const auto params = trained_model();
  const auto data = toy::dataset(80, 8, 1);
  const auto c = mc_pairwise_confidence(params, data.items[4].features, data.items[4].features, 10,
                                        0.5, 9, "x", "x");
  EXPECT_EQ(c.confidence, 0.5);
  EXPECT_EQ(c.passes, 10u);
  EXPECT_EQ(c.dropout_p, 0.5);
  EXPECT_EQ(c.seed, 9u);
}

TEST(McConfidence, AntisymmetricAndDeterministic) {
  const auto params = trained_model();
  const auto data = toy::dataset(80, 8, 1);
  for (std::size_t i = 0; i + 1 < 40; i += 3) {
    const auto& a = data.items[i].features;
    const auto& b = data.items[i + 1].features;
    const double ab = mc_pairwise_confidence(params, a, b, 10, 0.5, i).confidence;
    const double ba = mc_pairwise_confidence(params, b, a, 10, 0.5, i).confidence;
    EXPECT_EQ(ab + ba, 1.0);
    EXPECT_EQ(mc_pairwise_confidence(params, a, b, 10, 0.5, i).confidence, ab);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    // k of N passes: a multiple of 1/(2N).
    EXPECT_EQ(ab * 20, std::round(ab * 20));
  }
}

TEST(McConfidence, ArgumentErrors) {
  const auto params = trained_model();
  const Vec f(8, 0.0), bad(3, 0.0);
  EXPECT_THROW(mc_pairwise_confidence(params, f, bad, 10, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(mc_pairwise_confidence(params, f, f, 0, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(mc_pairwise_confidence(params, f, f, 10, 1.0, 0), std::invalid_argument);
}

TEST(Profile, ShapeOrderAndAgreementWithPairwise) {
  const auto params = trained_model();
  const auto data = toy::dataset(80, 8, 1);
  const std::string anchor = data.items[10].id;
  const auto profile = confidence_profile(params, anchor, data, 10, 0.5, 4);
  ASSERT_EQ(profile.size(), 79u);
  for (std::size_t i = 1; i < profile.size(); ++i)
    EXPECT_LT(profile[i - 1].truth_rank, profile[i].truth_rank);
  for (const auto& p : profile) {
    EXPECT_NE(p.query_id, anchor);
    EXPECT_GE(p.confidence, 0.0);
    EXPECT_LE(p.confidence, 1.0);
  }
  // Same masks as the two-item estimator.
  const auto& q = profile[30];
  const auto* item = &*std::find_if(data.items.begin(), data.items.end(),
                                    [&](const RankedItem& it) { return it.id == q.query_id; });
  EXPECT_EQ(mc_pairwise_confidence(params, data.items[10].features, item->features, 10, 0.5, 4).confidence,
            q.confidence);
  EXPECT_THROW(confidence_profile(params, "nope", data, 10, 0.5, 4), std::invalid_argument);
}

TEST(Profile, NoDropoutCollapsesToThreeValues) {
  const auto params = trained_model();
  const auto data = toy::dataset(80, 8, 1);
  for (const auto& p : confidence_profile(params, data.items[0].id, data, 5, 0.0, 1))
    EXPECT_TRUE(p.confidence == 0.0 || p.confidence == 0.5 || p.confidence == 1.0);
}

TEST(Profile, CsvLayout) {
  const std::string csv = profile_csv({{"a", 3, 0.25}, {"b", 7, 1.0}});
  EXPECT_EQ(csv, "query_id,truth_rank,confidence\na,3,0.250000\nb,7,1.000000\n");
  EXPECT_EQ(certainty(0.2), 0.8);
  EXPECT_EQ(certainty(0.7), 0.7);
}
