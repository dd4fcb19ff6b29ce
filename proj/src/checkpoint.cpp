#include "rankforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rankforge {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "rankforge-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

const char* kOrbNetBlocks[] = {"trunk.layer1.weight", "trunk.layer1.bias", "trunk.layer2.weight",
                               "trunk.layer2.bias",   "ordinal.weight",    "ordinal.bias",
                               "offset.weight",       "offset.bias"};
const char* kScorerBlocks[] = {"trunk.layer1.weight", "trunk.layer1.bias", "trunk.layer2.weight",
                               "trunk.layer2.bias",   "head.weight",       "head.bias"};

}  // namespace

std::vector<double> model_scores(const TrainedModel& model, const RankedDataset& data) {
  if (const auto* orb = std::get_if<OrbNetParams>(&model.params)) return predict_values(*orb, data);
  return scorer_predict(std::get<ScorerParams>(model.params), data);
}

json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"momentum", cfg.momentum},
          {"batch_size", cfg.batch_size},
          {"weight_decay", cfg.weight_decay},
          {"lr_init", cfg.lr_init},
          {"lr_decay", cfg.lr_decay},
          {"plateau_patience", cfg.plateau_patience},
          {"m", cfg.m},
          {"seed", cfg.seed},
          {"dropout_p", cfg.dropout_p},
          {"validation_fraction", cfg.validation_fraction},
          {"hidden1", cfg.hidden1},
          {"hidden2", cfg.hidden2},
          {"hinge_margin", cfg.hinge_margin},
          {"grid_search", cfg.grid_search}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.lr_init = j.value("lr_init", c.lr_init);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.m = j.value("m", c.m);
  c.seed = j.value("seed", c.seed);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.hidden1 = j.value("hidden1", c.hidden1);
  c.hidden2 = j.value("hidden2", c.hidden2);
  c.hinge_margin = j.value("hinge_margin", c.hinge_margin);
  c.grid_search = j.value("grid_search", c.grid_search);
  return c;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  TrainedModel copy = model;
  std::vector<std::span<double>> blocks;
  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"method", method_name(model.method)},
                 {"config", to_json(model.config)},
                 {"seed", model.config.seed},
                 {"dtype", "float64"},
                 {"byte_order", "little"}};
  const char* const* names = nullptr;
  if (auto* orb = std::get_if<OrbNetParams>(&copy.params)) {
    blocks = param_blocks(*orb);
    names = kOrbNetBlocks;
    header["arch"] = {{"feature_dim", orb->feature_dim()},
                      {"hidden1", orb->trunk.layer1.out()},
                      {"hidden2", orb->trunk.layer2.out()},
                      {"m", orb->enc.m},
                      {"n", orb->enc.n},
                      {"tau", orb->enc.tau},
                      {"dropout_p", orb->dropout_p}};
  } else {
    auto& sc = std::get<ScorerParams>(copy.params);
    blocks = param_blocks(sc);
    names = kScorerBlocks;
    header["arch"] = {{"feature_dim", sc.feature_dim()},
                      {"hidden1", sc.trunk.layer1.out()},
                      {"hidden2", sc.trunk.layer2.out()},
                      {"n", sc.n_train},
                      {"dropout_p", sc.dropout_p}};
  }
  json table = json::array();
  for (std::size_t b = 0; b < blocks.size(); ++b)
    table.push_back({{"name", names[b]}, {"size", blocks[b].size()}});
  header["blocks"] = table;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n';
  for (const auto& block : blocks)
    for (double v : block) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty checkpoint");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": malformed checkpoint header: " + e.what());
  }
  if (header.value("format", "") != kFormat)
    throw std::invalid_argument(path.string() + ": not a rankforge checkpoint");
  if (header.value("version", -1) != kVersion)
    throw std::invalid_argument(path.string() + ": unsupported checkpoint version " +
                                header.value("version", json(nullptr)).dump());

  TrainedModel model;
  model.method = parse_method(header.at("method").get<std::string>());
  model.config = train_config_from_json(header.at("config"));
  const json& arch = header.at("arch");
  const auto d = arch.at("feature_dim").get<std::size_t>();
  const auto h1 = arch.at("hidden1").get<std::size_t>();
  const auto h2 = arch.at("hidden2").get<std::size_t>();
  const auto n = arch.at("n").get<std::size_t>();
  const auto p = arch.at("dropout_p").get<double>();

  std::vector<std::span<double>> blocks;
  if (model.method == Method::orbnet) {
    const auto enc = EncodingConfig::make(n, arch.at("m").get<std::size_t>());
    model.params = zero_orbnet(d, h1, h2, enc, p);
    blocks = param_blocks(std::get<OrbNetParams>(model.params));
  } else {
    ScorerParams sc{Trunk{Dense(h1, d), Dense(h2, h1)}, Dense(1, h2), p, n};
    model.params = std::move(sc);
    blocks = param_blocks(std::get<ScorerParams>(model.params));
  }
  const json& table = header.at("blocks");
  if (table.size() != blocks.size())
    throw std::invalid_argument(path.string() + ": block table does not match architecture");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (table[b].at("size").get<std::size_t>() != blocks[b].size())
      throw std::invalid_argument(path.string() + ": block " +
                                  table[b].at("name").get<std::string>() + " has wrong size");
    for (double& v : blocks[b]) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits))
        throw std::invalid_argument(path.string() + ": truncated parameter data");
      v = std::bit_cast<double>(to_little(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::invalid_argument(path.string() + ": trailing bytes after parameters");
  return model;
}

}  // namespace rankforge
