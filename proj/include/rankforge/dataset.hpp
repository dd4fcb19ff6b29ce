#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankforge/numerics.hpp"

namespace rankforge {

// One item. Larger rank means better quality; ranks are 1-based.
struct RankedItem {
  std::string id;
  Vec features;
  int rank = 0;
  std::optional<double> latent_quality;

  bool operator==(const RankedItem&) const = default;
};

enum class Provenance { synthetic, ingested, annotation_export };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct RankedDataset {
  std::vector<RankedItem> items;
  std::size_t feature_dim = 0;
  Provenance provenance = Provenance::ingested;

  std::size_t size() const { return items.size(); }
  std::vector<int> ranks() const;
  // Throws std::invalid_argument if ranks are not a permutation of 1..n or a
  // feature vector has the wrong length or a non-finite entry.
  void validate() const;

  bool operator==(const RankedDataset&) const = default;
};

enum class Nonlinearity { linear, polynomial };

struct SyntheticConfig {
  std::size_t n = 300;
  std::size_t d = 64;
  std::size_t informative_dim = 64;
  double feature_noise_sigma = 0.0;
  Nonlinearity nonlinearity = Nonlinearity::linear;
  std::uint64_t seed = 0;
};

// Latent quality q ~ U[0,1] (ties redrawn); features = A * basis(q) + noise,
// where only the first informative_dim coordinates of A are nonzero.
RankedDataset generate_synthetic(const SyntheticConfig& cfg);

// `config`, when given, is stored in the header and ignored by the reader.
void save_dataset(const RankedDataset& ds, const std::filesystem::path& path,
                  const nlohmann::json& config = nullptr);
RankedDataset load_dataset(const std::filesystem::path& path);

struct Fold {
  RankedDataset train;
  RankedDataset test;
};

// Seeded k-fold partition. Ranks inside each returned subset are re-densified
// to 1..|subset| keeping their relative order.
std::vector<Fold> kfold_split(const RankedDataset& ds, std::size_t k, std::uint64_t seed);

// Items at `indices` (in that order) with ranks re-densified.
RankedDataset subset(const RankedDataset& ds, const std::vector<std::size_t>& indices);

// Dense 1..n ranks of arbitrary tie-free values (smallest value gets rank 1).
std::vector<int> dense_ranks(const std::vector<double>& values);

// Copy of `ds` whose ranks are replaced by the given id -> rank map.
RankedDataset with_ranks(const RankedDataset& ds, const std::map<std::string, int>& ranks,
                         Provenance provenance);

// Ranks induced by latent quality; throws if any item lacks it.
std::vector<int> latent_ranks(const RankedDataset& ds);

double percentile_rank(int y, std::size_t n);

}  // namespace rankforge
