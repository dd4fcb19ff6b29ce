#include "rankforge/uncertainty.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace rankforge {

namespace {

RngStream pass_stream(std::uint64_t seed, std::size_t pass) {
  return RngStream(seed, 0).derive("mc-dropout").derive(static_cast<std::uint64_t>(pass));
}

// Eval-mode scores of all rows of X under one shared mask set.
Vec pass_scores(const OrbNetParams& params, const Mat& X, double p, std::size_t pass,
                std::uint64_t seed) {
  DropoutMasks masks;
  if (p > 0) {
    RngStream rng = pass_stream(seed, pass);
    masks = draw_shared_masks(X.rows, params.trunk.layer1.out(), params.trunk.layer2.out(), p, rng);
  }
  OrbNetBatch out;
  forward_batch(params, X, Mode::eval, masks, out);
  return out.s;
}

// Half-credit counts: 2 for a win, 1 for a tie.
long long half_votes(double a, double b) { return a > b ? 2 : (a == b ? 1 : 0); }

void check_args(std::size_t passes, double p) {
  if (passes < 1) throw std::invalid_argument("MC dropout needs at least one pass");
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout p must be in [0, 1)");
}

}  // namespace

ConfidenceEstimate mc_pairwise_confidence(const OrbNetParams& params, std::span<const double> f_a,
                                          std::span<const double> f_b, std::size_t passes,
                                          double dropout_p, std::uint64_t seed, std::string id_a,
                                          std::string id_b) {
  check_args(passes, dropout_p);
  if (f_a.size() != params.feature_dim() || f_b.size() != params.feature_dim())
    throw std::invalid_argument("mc_pairwise_confidence: feature dimension mismatch");
  Mat X(2, params.feature_dim());
  std::copy(f_a.begin(), f_a.end(), X.row(0).begin());
  std::copy(f_b.begin(), f_b.end(), X.row(1).begin());

  long long votes = 0;
  const auto n = static_cast<std::ptrdiff_t>(passes);
#pragma omp parallel for reduction(+ : votes) schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const Vec s = pass_scores(params, X, dropout_p, static_cast<std::size_t>(t), seed);
    votes += half_votes(s[0], s[1]);
  }
  return {std::move(id_a), std::move(id_b),
          static_cast<double>(votes) / (2.0 * static_cast<double>(passes)), passes, dropout_p, seed};
}

std::vector<ProfilePoint> confidence_profile(const OrbNetParams& params, const std::string& anchor_id,
                                             const RankedDataset& data, std::size_t passes,
                                             double dropout_p, std::uint64_t seed) {
  check_args(passes, dropout_p);
  std::size_t anchor = data.size();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.items[i].id == anchor_id) anchor = i;
  if (anchor == data.size()) throw std::invalid_argument("unknown anchor id '" + anchor_id + "'");

  // Row 0 is the anchor, then every query; the pass masks are shared by all
  // rows, which matches pairing them two at a time.
  std::vector<std::size_t> queries;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (i != anchor) queries.push_back(i);
  std::sort(queries.begin(), queries.end(),
            [&](std::size_t a, std::size_t b) { return data.items[a].rank < data.items[b].rank; });
  std::vector<const Vec*> rows{&data.items[anchor].features};
  for (std::size_t q : queries) rows.push_back(&data.items[q].features);
  const Mat X = stack_rows(rows, data.feature_dim);
  if (X.cols != params.feature_dim())
    throw std::invalid_argument("confidence_profile: feature dimension mismatch");

  std::vector<long long> votes(queries.size(), 0);
  for (std::size_t t = 0; t < passes; ++t) {
    const Vec s = pass_scores(params, X, dropout_p, t, seed);
    for (std::size_t q = 0; q < queries.size(); ++q) votes[q] += half_votes(s[0], s[q + 1]);
  }
  std::vector<ProfilePoint> out;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& item = data.items[queries[q]];
    out.push_back({item.id, item.rank,
                   static_cast<double>(votes[q]) / (2.0 * static_cast<double>(passes))});
  }
  return out;
}

double certainty(double confidence) { return std::max(confidence, 1.0 - confidence); }

std::string profile_csv(const std::vector<ProfilePoint>& profile) {
  std::string out = "query_id,truth_rank,confidence\n";
  char buf[64];
  for (const auto& p : profile) {
    std::snprintf(buf, sizeof buf, ",%d,%.6f\n", p.truth_rank, p.confidence);
    out += p.query_id + buf;
  }
  return out;
}

}  // namespace rankforge
