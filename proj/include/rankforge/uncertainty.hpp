#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankforge/dataset.hpp"
#include "rankforge/orbnet.hpp"

namespace rankforge {

// Share of stochastic passes in which item a outscored item b.
struct ConfidenceEstimate {
  std::string id_a;
  std::string id_b;
  double confidence = 0.0;
  std::size_t passes = 0;
  double dropout_p = 0.0;
  std::uint64_t seed = 0;
};

// Pass t draws one mask set from stream (seed, t) and applies it to both
// items, so confidence(a, b) + confidence(b, a) = 1. A tie within a pass
// scores one half.
ConfidenceEstimate mc_pairwise_confidence(const OrbNetParams& params, std::span<const double> f_a,
                                          std::span<const double> f_b, std::size_t passes,
                                          double dropout_p, std::uint64_t seed,
                                          std::string id_a = "a", std::string id_b = "b");

struct ProfilePoint {
  std::string query_id;
  int truth_rank = 0;
  double confidence = 0.0;
};

// Confidence of the anchor over every other item, ordered by the query's
// rank. Uses the same per-pass masks as mc_pairwise_confidence.
std::vector<ProfilePoint> confidence_profile(const OrbNetParams& params, const std::string& anchor_id,
                                             const RankedDataset& data, std::size_t passes,
                                             double dropout_p, std::uint64_t seed);

// Distance of a confidence from a coin flip, mapped to [0.5, 1].
double certainty(double confidence);

// query_id,truth_rank,confidence
std::string profile_csv(const std::vector<ProfilePoint>& profile);

}  // namespace rankforge
