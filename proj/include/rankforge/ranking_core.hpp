#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rankforge {

// m bins of width tau = n / m over ranks 1..n.
struct EncodingConfig {
  std::size_t n = 0;
  std::size_t m = 0;
  double tau = 0.0;

  static EncodingConfig make(std::size_t n, std::size_t m);
  std::size_t thresholds() const { return m - 1; }
  bool operator==(const EncodingConfig&) const = default;
};

// bits[j-1] = 1 iff y >= j * tau, j = 1..m-1.
struct OrdinalTarget {
  std::vector<int> bits;
};

OrdinalTarget encode_ordinal(int y, const EncodingConfig& cfg);

// 1 if y_i > y_j, 0 if y_i < y_j, 0.5 on a tie.
double pairwise_target(int y_i, int y_j);

enum class CoarseMode { hard, soft };

// hard: tau * #{j : l_j > 0}, the left bound of the predicted bin.
// soft: tau * sum_j sigmoid(l_j), its differentiable surrogate.
double coarse_score(std::span<const double> logits, const EncodingConfig& cfg, CoarseMode mode);

// s = s_bar + tau * sigmoid(s_tilde). The result always satisfies
// 0 < s - s_bar < tau in floating point.
double final_score(double s_bar, double s_tilde, const EncodingConfig& cfg);

}  // namespace rankforge
