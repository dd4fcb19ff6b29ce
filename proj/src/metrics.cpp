#include "rankforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace rankforge {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("metric: length mismatch");
  if (a < 2) throw std::invalid_argument("metric: need at least 2 items");
}

// 1-based ranks, ties share the average of the positions they span.
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

std::vector<double> as_double(std::span<const int> v) { return {v.begin(), v.end()}; }

struct PairCounts {
  double concordant = 0, discordant = 0, pred_ties = 0, total = 0;
};

// Sorts by truth and sweeps a Fenwick tree over compressed predictions:
// O(n log n) instead of enumerating pairs.
PairCounts count_pairs(std::span<const int> truth, std::span<const double> pred) {
  const std::size_t n = truth.size();
  std::vector<double> uniq(pred.begin(), pred.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<std::size_t> by_truth(n);
  std::iota(by_truth.begin(), by_truth.end(), 0);
  std::sort(by_truth.begin(), by_truth.end(),
            [&](std::size_t a, std::size_t b) { return truth[a] < truth[b]; });

  std::vector<long long> tree(uniq.size() + 1, 0);
  auto add = [&](std::size_t pos) {
    for (++pos; pos < tree.size(); pos += pos & (~pos + 1)) ++tree[pos];
  };
  auto prefix = [&](std::size_t pos) {  // count of inserted values with index < pos
    long long s = 0;
    for (; pos > 0; pos -= pos & (~pos + 1)) s += tree[pos];
    return s;
  };

  PairCounts c;
  for (std::size_t seen = 0; seen < n; ++seen) {
    const std::size_t i = by_truth[seen];
    if (seen > 0 && truth[by_truth[seen - 1]] == truth[i])
      throw std::invalid_argument("metric: truth ranks contain ties");
    const auto slot = static_cast<std::size_t>(
        std::lower_bound(uniq.begin(), uniq.end(), pred[i]) - uniq.begin());
    const long long below = prefix(slot);
    const long long at_or_below = prefix(slot + 1);
    c.concordant += static_cast<double>(below);
    c.pred_ties += static_cast<double>(at_or_below - below);
    c.discordant += static_cast<double>(static_cast<long long>(seen) - at_or_below);
    add(slot);
  }
  c.total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return c;
}

}  // namespace

double spearman(std::span<const int> truth, std::span<const double> pred) {
  check_pair(truth.size(), pred.size());
  const auto t = average_ranks(as_double(truth));
  const auto p = average_ranks(pred);
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) sum_d2 += (t[i] - p[i]) * (t[i] - p[i]);
  const double n = static_cast<double>(t.size());
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

double kendall_tau(std::span<const int> truth, std::span<const double> pred) {
  check_pair(truth.size(), pred.size());
  const PairCounts c = count_pairs(truth, pred);
  const double denom = std::sqrt(c.total * (c.total - c.pred_ties));
  if (denom == 0.0) return 0.0;
  return (c.concordant - c.discordant) / denom;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x.size(), y.size());
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double pairwise_accuracy(std::span<const int> truth, std::span<const double> pred) {
  check_pair(truth.size(), pred.size());
  const PairCounts c = count_pairs(truth, pred);
  // Without prediction ties the two agree in exact arithmetic; sharing the
  // expression keeps them equal in floating point too.
  if (c.pred_ties == 0.0) return (1.0 + kendall_tau(truth, pred)) / 2.0;
  return (c.concordant + 0.5 * c.pred_ties) / c.total;
}

double ndcg_at_k(std::span<const int> truth, std::span<const double> pred, std::size_t k) {
  check_pair(truth.size(), pred.size());
  const std::size_t n = truth.size();
  if (k < 1 || k > n)
    throw std::invalid_argument("ndcg_at_k: k=" + std::to_string(k) + " outside 1.." +
                                std::to_string(n));
  const auto ranks = average_ranks(as_double(truth));
  std::vector<double> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = ranks[i] / static_cast<double>(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pred[a] > pred[b]; });
  std::vector<double> ideal = rel;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double dcg = 0, idcg = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += rel[order[i]] / discount;
    idcg += ideal[i] / discount;
  }
  return dcg / idcg;
}

MetricReport evaluate(std::span<const int> truth, std::span<const double> pred,
                      const std::vector<std::size_t>& ndcg_cutoffs) {
  MetricReport r;
  r.spc = spearman(truth, pred);
  r.ktc = kendall_tau(truth, pred);
  r.pacc = pairwise_accuracy(truth, pred);
  const auto ranks = average_ranks(as_double(truth));
  std::vector<double> percentile(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    percentile[i] = ranks[i] / static_cast<double>(truth.size());
  try {
    r.prc = pearson(percentile, pred);
  } catch (const std::invalid_argument&) {
    r.prc = 0.0;  // constant prediction
  }
  for (std::size_t k : ndcg_cutoffs) r.ndcg[k] = ndcg_at_k(truth, pred, std::min(k, truth.size()));
  return r;
}

std::string metric_csv_header() { return "method,fold,spc,pacc,prc,ktc,ndcg@3,ndcg@5"; }

std::string metric_csv_row(const std::string& method, const std::string& fold,
                           const MetricReport& r) {
  auto at = [&](std::size_t k) {
    auto it = r.ndcg.find(k);
    return it == r.ndcg.end() ? 0.0 : it->second;
  };
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", method.c_str(),
                fold.c_str(), r.spc, r.pacc, r.prc, r.ktc, at(3), at(5));
  return buf;
}

}  // namespace rankforge
