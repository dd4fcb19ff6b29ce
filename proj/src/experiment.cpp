#include "rankforge/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace rankforge {

TrainedModel train_method(Method method, const RankedDataset& train, const TrainConfig& cfg) {
  TrainedModel model;
  model.method = method;
  model.config = cfg;
  if (method == Method::orbnet) {
    model.params = train_orbnet(train, cfg).params;
  } else {
    BaselineTrainResult r = train_baseline(method, train, cfg);
    model.config.lr_init = r.lr;
    model.config.hinge_margin = r.margin;
    model.params = std::move(r.params);
  }
  return model;
}

Truth parse_truth(const std::string& s) {
  if (s == "annotated") return Truth::annotated;
  if (s == "latent") return Truth::latent;
  throw std::invalid_argument("unknown truth source '" + s + "' (annotated|latent)");
}

std::string to_string(Truth t) { return t == Truth::latent ? "latent" : "annotated"; }

std::vector<FoldResult> run_cv(const RankedDataset& data, const CvOptions& opts) {
  const auto folds = kfold_split(data, opts.k, opts.train.seed);
  std::vector<FoldResult> results;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    TrainConfig cfg = opts.train;
    cfg.seed = RngStream(opts.train.seed, 0).derive("fold").derive(f).next_u64();
    const TrainedModel model = train_method(opts.method, folds[f].train, cfg);
    const auto& test = folds[f].test;
    const auto scores = model_scores(model, test);
    const auto truth = opts.truth == Truth::latent ? latent_ranks(test) : test.ranks();
    results.push_back({f + 1, evaluate(truth, scores)});
  }
  return results;
}

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0};
}

nlohmann::json to_json(const CvOptions& opts) {
  return {{"method", method_name(opts.method)},
          {"k", opts.k},
          {"truth", to_string(opts.truth)},
          {"train", to_json(opts.train)}};
}

std::string cv_csv(const std::vector<FoldResult>& results, const CvOptions& opts) {
  std::string out = "# config " + to_json(opts).dump() + "\n";
  out += metric_csv_header() + "\n";
  const std::string method = method_name(opts.method);
  std::vector<MetricReport> reports;
  for (const auto& r : results) {
    out += metric_csv_row(method, std::to_string(r.fold), r.report) + "\n";
    reports.push_back(r.report);
  }
  auto column = [&](auto pick) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(pick(r));
    return mean_std(v);
  };
  auto ndcg = [](const MetricReport& r, std::size_t k) {
    auto it = r.ndcg.find(k);
    return it == r.ndcg.end() ? 0.0 : it->second;
  };
  const MeanStd spc = column([](const MetricReport& r) { return r.spc; });
  const MeanStd pacc = column([](const MetricReport& r) { return r.pacc; });
  const MeanStd prc = column([](const MetricReport& r) { return r.prc; });
  const MeanStd ktc = column([](const MetricReport& r) { return r.ktc; });
  const MeanStd n3 = column([&](const MetricReport& r) { return ndcg(r, 3); });
  const MeanStd n5 = column([&](const MetricReport& r) { return ndcg(r, 5); });
  MetricReport mean{spc.mean, pacc.mean, prc.mean, ktc.mean, {{3, n3.mean}, {5, n5.mean}}};
  MetricReport sd{spc.std, pacc.std, prc.std, ktc.std, {{3, n3.std}, {5, n5.std}}};
  out += metric_csv_row(method, "mean", mean) + "\n";
  out += metric_csv_row(method, "std", sd) + "\n";
  return out;
}

RankedDataset annotate_dataset(const RankedDataset& data, double beta, std::size_t n_sub,
                               std::uint64_t seed, SimulationStats* stats) {
  std::vector<std::string> ids;
  std::map<std::string, double> latent;
  for (const auto& it : data.items) {
    if (!it.latent_quality) throw std::invalid_argument("item " + it.id + " has no latent quality");
    ids.push_back(it.id);
    latent[it.id] = *it.latent_quality;
  }
  // Present items to the annotator in a seeded random order.
  RngStream(seed, 0).derive("presentation").shuffle(ids);
  AnnotationSession session = AnnotationSession::create("simulated", ids, n_sub, seed);
  NoisyOracle oracle(beta, std::move(latent), seed);
  const SimulationStats s = simulate(session, oracle);
  if (stats) *stats = s;
  return with_ranks(data, session.export_ranking(), Provenance::annotation_export);
}

}  // namespace rankforge
