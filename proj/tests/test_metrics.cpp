#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rankforge/metrics.hpp"
#include "rankforge/numerics.hpp"

using namespace rankforge;

namespace {

struct Case {
  std::vector<int> truth;
  std::vector<double> pred;
};

// Random tie-free truth; predictions optionally quantized to force ties.
Case random_case(RngStream& rng, std::size_t n, bool ties) {
  Case c;
  for (std::size_t i = 0; i < n; ++i) c.truth.push_back(static_cast<int>(i + 1));
  rng.shuffle(c.truth);
  for (std::size_t i = 0; i < n; ++i) {
    double v = rng.uniform(-1, 1) + 0.5 * c.truth[i] / static_cast<double>(n);
    if (ties) v = std::round(v * 3) / 3;
    c.pred.push_back(v);
  }
  return c;
}

}  // namespace

TEST(Metrics, SpearmanExample) {
  EXPECT_NEAR(spearman(std::vector<int>{1, 2, 3, 4, 5}, std::vector<double>{2, 1, 4, 3, 5}), 0.8,
              1e-15);
  EXPECT_EQ(spearman(std::vector<int>{1, 2, 3}, std::vector<double>{1, 2, 3}), 1.0);
  EXPECT_EQ(spearman(std::vector<int>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0);
}

TEST(Metrics, KendallAndPaccExample) {
  const std::vector<int> truth{1, 2, 3};
  const std::vector<double> pred{1, 3, 2};
  EXPECT_NEAR(kendall_tau(truth, pred), 1.0 / 3, 1e-15);
  EXPECT_NEAR(pairwise_accuracy(truth, pred), 2.0 / 3, 1e-15);
}

TEST(Metrics, NdcgExample) {
  // Worst item predicted best; rel = y/n.
  const std::vector<int> truth{1, 2, 3};
  const std::vector<double> pred{3, 2, 1};
  EXPECT_NEAR(ndcg_at_k(truth, pred, 1), 1.0 / 3, 1e-15);
  EXPECT_EQ(ndcg_at_k(truth, std::vector<double>{1, 2, 3}, 3), 1.0);
  EXPECT_THROW(ndcg_at_k(truth, pred, 4), std::invalid_argument);
  EXPECT_THROW(ndcg_at_k(truth, pred, 0), std::invalid_argument);
}

TEST(Metrics, NdcgTiesVisitedInIndexOrder) {
  const std::vector<int> truth{3, 1, 2};
  EXPECT_EQ(ndcg_at_k(truth, std::vector<double>{0, 0, 0}, 1), 1.0);
  EXPECT_NEAR(ndcg_at_k(std::vector<int>{1, 3, 2}, std::vector<double>{0, 0, 0}, 1), 1.0 / 3, 1e-15);
}

TEST(Metrics, PearsonBasics) {
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
               std::invalid_argument);
}

TEST(Metrics, ArgumentErrors) {
  EXPECT_THROW(spearman(std::vector<int>{1}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(kendall_tau(std::vector<int>{1, 2}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Metrics, MatchOraclesOnRandomCases) {
  RngStream rng(2024, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const Case c = random_case(rng, n, trial % 3 == 0);
    SCOPED_TRACE("trial " + std::to_string(trial) + " n=" + std::to_string(n));
    EXPECT_NEAR(spearman(c.truth, c.pred), oracle::spearman(c.truth, c.pred), 1e-12);
    EXPECT_NEAR(pairwise_accuracy(c.truth, c.pred), oracle::pairwise_accuracy(c.truth, c.pred), 1e-12);
    const bool constant = std::all_of(c.pred.begin(), c.pred.end(),
                                      [&](double v) { return v == c.pred[0]; });
    if (!constant) {
      EXPECT_NEAR(kendall_tau(c.truth, c.pred), oracle::kendall_tau_b(c.truth, c.pred), 1e-12);
      const std::vector<double> t(c.truth.begin(), c.truth.end());
      EXPECT_NEAR(pearson(t, c.pred), oracle::pearson(t, c.pred), 1e-12);
    }
    for (std::size_t k : {1u, 3u, 5u})
      if (k <= n) EXPECT_NEAR(ndcg_at_k(c.truth, c.pred, k), oracle::ndcg(c.truth, c.pred, k), 1e-12);
  }
}

TEST(Metrics, PaccIsAffineInKendallWithoutTies) {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng, 2 + rng.below(49), false);
    EXPECT_EQ(pairwise_accuracy(c.truth, c.pred), (1 + kendall_tau(c.truth, c.pred)) / 2);
  }
}

TEST(Metrics, SpearmanEqualsPearsonOfRanksWithoutTies) {
  RngStream rng(8, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Case c = random_case(rng, 3 + rng.below(40), false);
    const auto pr = oracle::average_ranks(c.pred);
    const std::vector<double> rp(pr.begin(), pr.end());
    const std::vector<double> t(c.truth.begin(), c.truth.end());
    EXPECT_NEAR(spearman(c.truth, c.pred), pearson(t, rp), 1e-12);
  }
}

TEST(Metrics, EvaluateReport) {
  const std::vector<int> truth{1, 2, 3, 4, 5, 6};
  const std::vector<double> pred{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const MetricReport r = evaluate(truth, pred);
  EXPECT_EQ(r.spc, 1.0);
  EXPECT_EQ(r.ktc, 1.0);
  EXPECT_EQ(r.pacc, 1.0);
  EXPECT_NEAR(r.prc, 1.0, 1e-12);
  EXPECT_EQ(r.ndcg.at(1), 1.0);
  EXPECT_EQ(r.ndcg.at(5), 1.0);
  const MetricReport flat = evaluate(truth, std::vector<double>(6, 0.5));
  EXPECT_EQ(flat.prc, 0.0);
  EXPECT_EQ(flat.pacc, 0.5);
  EXPECT_EQ(metric_csv_header(), "method,fold,spc,pacc,prc,ktc,ndcg@3,ndcg@5");
  EXPECT_EQ(metric_csv_row("orbnet", "1", r), "orbnet,1,1.000000,1.000000,1.000000,1.000000,1.000000,1.000000");
}
