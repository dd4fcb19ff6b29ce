#pragma once

#include <filesystem>
#include <variant>

#include <json.hpp>

#include "rankforge/baselines.hpp"
#include "rankforge/orbnet.hpp"

namespace rankforge {

struct TrainedModel {
  Method method = Method::orbnet;
  std::variant<OrbNetParams, ScorerParams> params;
  TrainConfig config;
};

// Eval-mode scores for every item (ORBNet scores normalized by n).
std::vector<double> model_scores(const TrainedModel& model, const RankedDataset& data);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// File layout: one JSON header line (format, version, method, architecture,
// config, parameter block table), then every block as little-endian float64
// in the declared order.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rankforge
