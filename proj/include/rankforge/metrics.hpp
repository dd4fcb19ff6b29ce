#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace rankforge {

// Ranking metrics. `truth` holds tie-free integer ranks (larger is better);
// `pred` holds predicted scores (larger is better) and may contain ties.
// All throw std::invalid_argument on length mismatch or fewer than 2 items.

// 1 - 6 sum d^2 / (n (n^2 - 1)) with average ranks for tied predictions.
double spearman(std::span<const int> truth, std::span<const double> pred);
// Kendall tau-b; equals tau-a when predictions are tie-free.
double kendall_tau(std::span<const int> truth, std::span<const double> pred);
// Product-moment correlation. Throws on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
// Fraction of correctly ordered pairs; tied predictions earn half credit.
double pairwise_accuracy(std::span<const int> truth, std::span<const double> pred);
// DCG@k / IDCG@k with linear gain y/n. Items with equal predictions are
// visited in index order.
double ndcg_at_k(std::span<const int> truth, std::span<const double> pred, std::size_t k);

struct MetricReport {
  double spc = 0, pacc = 0, prc = 0, ktc = 0;
  std::map<std::size_t, double> ndcg;
};

// All five metrics; PRC compares predictions with percentile ranks y/n.
MetricReport evaluate(std::span<const int> truth, std::span<const double> pred,
                      const std::vector<std::size_t>& ndcg_cutoffs = {1, 3, 5});

std::string metric_csv_header();
// method, fold, spc, pacc, prc, ktc, ndcg@3, ndcg@5
std::string metric_csv_row(const std::string& method, const std::string& fold,
                           const MetricReport& r);

}  // namespace rankforge
