#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankforge/annotation.hpp"
#include "rankforge/checkpoint.hpp"
#include "rankforge/metrics.hpp"

namespace rankforge {

TrainedModel train_method(Method method, const RankedDataset& train, const TrainConfig& cfg);

// Which ordering test folds are scored against.
enum class Truth { annotated, latent };
Truth parse_truth(const std::string& s);
std::string to_string(Truth t);

struct CvOptions {
  Method method = Method::orbnet;
  std::size_t k = 10;
  TrainConfig train;  // train.seed drives folds and every fold's model
  Truth truth = Truth::annotated;
};

struct FoldResult {
  std::size_t fold = 0;
  MetricReport report;
};

std::vector<FoldResult> run_cv(const RankedDataset& data, const CvOptions& opts);

struct MeanStd {
  double mean = 0;
  double std = 0;  // sample standard deviation
};
MeanStd mean_std(const std::vector<double>& v);

nlohmann::json to_json(const CvOptions& opts);

// '#'-prefixed config line, header, one row per fold, then mean and std rows.
std::string cv_csv(const std::vector<FoldResult>& results, const CvOptions& opts);

// Ranks produced by merge-sort annotation with a simulated annotator of
// sharpness beta; needs latent quality on every item.
RankedDataset annotate_dataset(const RankedDataset& data, double beta, std::size_t n_sub,
                               std::uint64_t seed, SimulationStats* stats = nullptr);

}  // namespace rankforge
