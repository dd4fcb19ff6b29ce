#include "rankforge/ranking_core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rankforge/numerics.hpp"

namespace rankforge {

EncodingConfig EncodingConfig::make(std::size_t n, std::size_t m) {
  if (m < 2) throw std::invalid_argument("EncodingConfig: m must be >= 2");
  if (n < m)
    throw std::invalid_argument("EncodingConfig: n=" + std::to_string(n) + " smaller than m=" +
                                std::to_string(m));
  return {n, m, static_cast<double>(n) / static_cast<double>(m)};
}

OrdinalTarget encode_ordinal(int y, const EncodingConfig& cfg) {
  if (y < 1 || static_cast<std::size_t>(y) > cfg.n)
    throw std::out_of_range("encode_ordinal: rank " + std::to_string(y) + " outside 1.." +
                            std::to_string(cfg.n));
  OrdinalTarget t;
  t.bits.resize(cfg.thresholds());
  // y >= j * n / m, compared in integers so bin edges are exact.
  const auto ym = static_cast<std::size_t>(y) * cfg.m;
  for (std::size_t j = 1; j < cfg.m; ++j) t.bits[j - 1] = ym >= j * cfg.n ? 1 : 0;
  return t;
}

double pairwise_target(int y_i, int y_j) {
  if (y_i > y_j) return 1.0;
  if (y_i < y_j) return 0.0;
  return 0.5;
}

double coarse_score(std::span<const double> logits, const EncodingConfig& cfg, CoarseMode mode) {
  if (logits.size() != cfg.thresholds())
    throw std::invalid_argument("coarse_score: expected " + std::to_string(cfg.thresholds()) +
                                " logits, got " + std::to_string(logits.size()));
  double acc = 0.0;
  for (double l : logits) acc += mode == CoarseMode::hard ? (l > 0.0 ? 1.0 : 0.0) : sigmoid(l);
  return cfg.tau * acc;
}

double final_score(double s_bar, double s_tilde, const EncodingConfig& cfg) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double s = s_bar + cfg.tau * sigmoid(s_tilde);
  // Saturated sigmoids or absorption into a large s_bar would break the
  // strict offset bounds; step to the nearest representable value inside.
  if (s - s_bar <= 0.0) s = std::nextafter(s_bar, inf);
  while (s - s_bar >= cfg.tau) s = std::nextafter(s, -inf);
  return s;
}

}  // namespace rankforge
