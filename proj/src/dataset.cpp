#include "rankforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rankforge {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "rankforge-dataset";
constexpr int kVersion = 1;

std::string item_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item%05zu", i);
  return buf;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::synthetic: return "synthetic";
    case Provenance::ingested: return "ingested";
    case Provenance::annotation_export: return "annotation-export";
  }
  return "ingested";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "ingested") return Provenance::ingested;
  if (s == "annotation-export") return Provenance::annotation_export;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

std::vector<int> RankedDataset::ranks() const {
  std::vector<int> r;
  r.reserve(items.size());
  for (const auto& it : items) r.push_back(it.rank);
  return r;
}

void RankedDataset::validate() const {
  const auto n = static_cast<int>(items.size());
  if (n == 0) throw std::invalid_argument("dataset has no items");
  std::vector<const RankedItem*> by_rank(items.size() + 1, nullptr);
  for (const auto& it : items) {
    if (it.features.size() != feature_dim)
      throw std::invalid_argument("item " + it.id + ": feature length " +
                                  std::to_string(it.features.size()) + " != feature_dim " +
                                  std::to_string(feature_dim));
    for (double v : it.features)
      if (!std::isfinite(v)) throw std::invalid_argument("item " + it.id + ": non-finite feature");
    if (it.rank < 1 || it.rank > n)
      throw std::invalid_argument("item " + it.id + ": rank " + std::to_string(it.rank) +
                                  " outside 1.." + std::to_string(n));
    if (by_rank[it.rank])
      throw std::invalid_argument("duplicate rank " + std::to_string(it.rank) + " on items " +
                                  by_rank[it.rank]->id + " and " + it.id);
    by_rank[it.rank] = &it;
  }
}

std::vector<int> dense_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> ranks(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (pos > 0 && values[order[pos]] == values[order[pos - 1]])
      throw std::invalid_argument("dense_ranks: tied values");
    ranks[order[pos]] = static_cast<int>(pos + 1);
  }
  return ranks;
}

RankedDataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n < 2) throw std::invalid_argument("generate_synthetic: n must be >= 2");
  if (cfg.d < 1) throw std::invalid_argument("generate_synthetic: d must be >= 1");
  if (cfg.informative_dim < 1 || cfg.informative_dim > cfg.d)
    throw std::invalid_argument("generate_synthetic: informative_dim must be in 1..d");
  if (!(cfg.feature_noise_sigma >= 0))
    throw std::invalid_argument("generate_synthetic: feature_noise_sigma must be >= 0");

  const RngStream root(cfg.seed, 0);
  RngStream latent_rng = root.derive("latent");
  RngStream map_rng = root.derive("map");
  RngStream noise_rng = root.derive("noise");

  std::vector<double> q;
  std::set<double> seen;
  while (q.size() < cfg.n) {
    const double v = latent_rng.uniform();
    if (seen.insert(v).second) q.push_back(v);
  }

  const std::size_t basis_dim = cfg.nonlinearity == Nonlinearity::linear ? 1 : 3;
  Mat A(cfg.d, basis_dim);
  for (std::size_t r = 0; r < cfg.informative_dim; ++r)
    for (std::size_t c = 0; c < basis_dim; ++c) A(r, c) = map_rng.normal();

  RankedDataset ds;
  ds.feature_dim = cfg.d;
  ds.provenance = Provenance::synthetic;
  const std::vector<int> ranks = dense_ranks(q);
  const Vec zero(cfg.d, 0.0);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Vec basis{q[i]};
    if (basis_dim == 3) {
      basis.push_back(q[i] * q[i]);
      basis.push_back(q[i] * q[i] * q[i]);
    }
    Vec f = affine(A, zero, basis);
    if (cfg.feature_noise_sigma > 0)
      for (double& v : f) v += cfg.feature_noise_sigma * noise_rng.normal();
    ds.items.push_back({item_id(i), std::move(f), ranks[i], q[i]});
  }
  return ds;
}

void save_dataset(const RankedDataset& ds, const std::filesystem::path& path,
                  const json& config) {
  ds.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"feature_dim", ds.feature_dim},
                 {"n", ds.size()},
                 {"provenance", to_string(ds.provenance)}};
  if (!config.is_null()) header["config"] = config;
  out << header.dump() << '\n';
  for (const auto& it : ds.items) {
    json rec = {{"id", it.id}, {"features", it.features}, {"rank", it.rank}};
    rec["latent_quality"] = it.latent_quality ? json(*it.latent_quality) : json(nullptr);
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

RankedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string where = path.string() + ":";

  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) throw std::invalid_argument(where + " no items");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument(where + std::to_string(lineno) + ": malformed header: " + e.what());
  }
  if (header.value("format", "") != kFormat)
    throw std::invalid_argument(where + std::to_string(lineno) + ": not a rankforge-dataset file");
  if (header.value("version", -1) != kVersion)
    throw std::invalid_argument(where + std::to_string(lineno) + ": unsupported version " +
                                header.value("version", json(nullptr)).dump());

  RankedDataset ds;
  ds.feature_dim = header.at("feature_dim").get<std::size_t>();
  ds.provenance = provenance_from_string(header.value("provenance", "ingested"));
  const auto declared_n = header.at("n").get<std::size_t>();

  std::map<int, std::string> rank_owner;
  while (next_line()) {
    const std::string at = where + std::to_string(lineno) + ": ";
    RankedItem it;
    try {
      const json rec = json::parse(line);
      it.id = rec.at("id").get<std::string>();
      it.features = rec.at("features").get<Vec>();
      it.rank = rec.at("rank").get<int>();
      if (rec.contains("latent_quality") && !rec["latent_quality"].is_null())
        it.latent_quality = rec["latent_quality"].get<double>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(at + "malformed record: " + e.what());
    }
    if (it.features.size() != ds.feature_dim)
      throw std::invalid_argument(at + "item " + it.id + " has " +
                                  std::to_string(it.features.size()) +
                                  " features, header declares " + std::to_string(ds.feature_dim));
    if (auto [pos, inserted] = rank_owner.emplace(it.rank, it.id); !inserted)
      throw std::invalid_argument(at + "duplicate rank " + std::to_string(it.rank) +
                                  " on items " + pos->second + " and " + it.id);
    ds.items.push_back(std::move(it));
  }
  if (ds.items.empty()) throw std::invalid_argument(where + " no items");
  if (declared_n != ds.size())
    throw std::invalid_argument(where + " header declares n=" + std::to_string(declared_n) +
                                " but file has " + std::to_string(ds.size()) + " items");
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + " " + e.what());
  }
  return ds;
}

RankedDataset subset(const RankedDataset& ds, const std::vector<std::size_t>& indices) {
  RankedDataset out;
  out.feature_dim = ds.feature_dim;
  out.provenance = ds.provenance;
  std::vector<double> old_ranks;
  for (std::size_t i : indices) {
    out.items.push_back(ds.items.at(i));
    old_ranks.push_back(ds.items[i].rank);
  }
  const std::vector<int> fresh = dense_ranks(old_ranks);
  for (std::size_t i = 0; i < out.items.size(); ++i) out.items[i].rank = fresh[i];
  return out;
}

std::vector<Fold> kfold_split(const RankedDataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (k > ds.size())
    throw std::invalid_argument("kfold_split: k=" + std::to_string(k) + " exceeds n=" +
                                std::to_string(ds.size()));
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  RngStream(seed, 0).derive("folds").shuffle(perm);

  const std::size_t base = ds.size() / k;
  const std::size_t extra = ds.size() % k;
  std::vector<std::size_t> fold_of(ds.size());
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) fold_of[perm[pos++]] = f;
  }

  std::vector<Fold> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < ds.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    folds.push_back({subset(ds, train), subset(ds, test)});
  }
  return folds;
}

RankedDataset with_ranks(const RankedDataset& ds, const std::map<std::string, int>& ranks,
                         Provenance provenance) {
  RankedDataset out = ds;
  out.provenance = provenance;
  for (auto& it : out.items) {
    auto found = ranks.find(it.id);
    if (found == ranks.end()) throw std::invalid_argument("with_ranks: no rank for item " + it.id);
    it.rank = found->second;
  }
  out.validate();
  return out;
}

std::vector<int> latent_ranks(const RankedDataset& ds) {
  std::vector<double> q;
  for (const auto& it : ds.items) {
    if (!it.latent_quality) throw std::invalid_argument("item " + it.id + " has no latent quality");
    q.push_back(*it.latent_quality);
  }
  return dense_ranks(q);
}

double percentile_rank(int y, std::size_t n) {
  if (y < 1 || static_cast<std::size_t>(y) > n)
    throw std::out_of_range("percentile_rank: y=" + std::to_string(y) + " outside 1.." +
                            std::to_string(n));
  return static_cast<double>(y) / static_cast<double>(n);
}

}  // namespace rankforge
