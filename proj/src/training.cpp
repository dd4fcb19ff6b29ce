#include "rankforge/training.hpp"

#include <algorithm>
#include <cmath>

namespace rankforge {

ValidationSplit split_validation(const RankedDataset& ds, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ds.size())));
  held = std::max<std::size_t>(held, 2);
  // Keep at least two items to train on.
  if (fraction <= 0.0 || held + 2 > ds.size()) {
    std::vector<std::size_t> all = perm;
    return {subset(ds, all), RankedDataset{{}, ds.feature_dim, ds.provenance}};
  }
  RngStream(seed, 0).derive("validation").shuffle(perm);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {subset(ds, train), subset(ds, val)};
}

}  // namespace rankforge
