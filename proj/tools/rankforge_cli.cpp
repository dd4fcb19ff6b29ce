// rankforge command line: data generation, training, evaluation, the
// cross-validation and seed-variance protocols, uncertainty profiles,
// simulated annotation sweeps and the annotation service.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankforge/checkpoint.hpp"
#include "rankforge/experiment.hpp"
#include "rankforge/service.hpp"
#include "rankforge/uncertainty.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rankforge;

namespace {

// Written under a ".partial" name and renamed once complete, so a failed run
// never leaves something that looks finished.
void write_artifact(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string config_line(const json& cfg) { return "# config " + cfg.dump() + "\n"; }

double parse_beta(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double b = std::stod(s, &used);
  if (used != s.size() || !(b >= 0)) throw std::invalid_argument("bad beta '" + s + "'");
  return b;
}

json beta_json(double b) { return std::isinf(b) ? json("inf") : json(b); }

template <class T, class F>
std::vector<T> split_list(const std::string& s, F parse) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(parse(tok));
  if (out.empty()) throw std::invalid_argument("empty list '" + s + "'");
  return out;
}

struct TrainFlags {
  std::string method = "orbnet";
  std::size_t epochs = 30;
  std::size_t m = 10;
  double dropout = 0.5;
  double lr = 1e-2;
  std::size_t batch = 32;
  std::uint64_t seed = 0;

  void add(CLI::App* app, bool with_method = true) {
    if (with_method)
      app->add_option("--method", method,
                      "orbnet|ranknet|hinge|listnet-local|listnet-global|regression")
          ->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--m", m, "number of ordinal bins")->capture_default_str();
    app->add_option("--dropout", dropout, "training dropout probability")->capture_default_str();
    app->add_option("--lr", lr, "initial learning rate")->capture_default_str();
    app->add_option("--batch", batch)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.m = m;
    c.dropout_p = dropout;
    c.lr_init = lr;
    c.batch_size = batch;
    c.seed = seed;
    return c;
  }
};

RankedDataset dataset_or_synthetic(const std::string& path, std::size_t n, std::uint64_t seed) {
  if (!path.empty()) return load_dataset(path);
  SyntheticConfig sc;
  sc.n = n;
  sc.seed = seed;
  return generate_synthetic(sc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankforge: learning to rank with coarse ordinal bins and fine offsets"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  SyntheticConfig syn;
  std::string basis = "linear", gen_out, gen_beta;
  std::size_t gen_nsub = 6;
  gen->add_option("--n", syn.n)->capture_default_str();
  gen->add_option("--d", syn.d)->capture_default_str();
  gen->add_option("--informative", syn.informative_dim)->capture_default_str();
  gen->add_option("--noise", syn.feature_noise_sigma, "feature noise sigma")->capture_default_str();
  gen->add_option("--basis", basis, "linear|polynomial")->capture_default_str();
  gen->add_option("--seed", syn.seed)->capture_default_str();
  gen->add_option("--beta", gen_beta, "replace ranks by a simulated annotation at this sharpness");
  gen->add_option("--n-sub", gen_nsub, "annotation sub-list size")->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // train
  auto* train = app.add_subcommand("train", "fit one model and write a checkpoint");
  TrainFlags train_flags;
  std::string train_data, train_out;
  train_flags.add(train);
  train->add_option("--dataset", train_data)->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "score a dataset with a checkpoint");
  std::string eval_data, eval_model, eval_out, eval_truth = "annotated";
  eval->add_option("--dataset", eval_data)->required()->check(CLI::ExistingFile);
  eval->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", eval_truth, "annotated|latent")->capture_default_str();
  eval->add_option("--out", eval_out, "metrics CSV (default stdout)");

  // cv
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  TrainFlags cv_flags;
  std::string cv_data, cv_out, cv_truth = "annotated";
  std::size_t cv_k = 10;
  cv_flags.add(cv);
  cv->add_option("--dataset", cv_data)->required()->check(CLI::ExistingFile);
  cv->add_option("--k", cv_k)->capture_default_str();
  cv->add_option("--truth", cv_truth, "annotated|latent")->capture_default_str();
  cv->add_option("--out", cv_out, "CSV (default stdout)");

  // variance
  auto* var = app.add_subcommand("variance", "cross-validation repeated over seeds");
  TrainFlags var_flags;
  std::string var_data, var_out, var_truth = "annotated";
  std::size_t var_k = 10, var_seeds = 10;
  var_flags.add(var);
  var->add_option("--dataset", var_data)->required()->check(CLI::ExistingFile);
  var->add_option("--k", var_k)->capture_default_str();
  var->add_option("--seeds", var_seeds)->capture_default_str();
  var->add_option("--truth", var_truth, "annotated|latent")->capture_default_str();
  var->add_option("--out", var_out, "CSV (default stdout)");

  // uncertainty
  auto* unc = app.add_subcommand("uncertainty", "MC-dropout confidence profiles for anchors");
  TrainFlags unc_flags;
  std::string unc_data, unc_model, unc_out = "profiles", unc_anchors = "1,10,20,30,40,50,last";
  std::size_t unc_passes = 10;
  double unc_p = 0.5;
  unc_flags.add(unc, false);
  unc->add_option("--dataset", unc_data)->required()->check(CLI::ExistingFile);
  unc->add_option("--model", unc_model, "ORBNet checkpoint (trained on --dataset if omitted)")
      ->check(CLI::ExistingFile);
  unc->add_option("--anchors", unc_anchors,
                  "anchor positions counted from the best item; 'last' is the worst")
      ->capture_default_str();
  unc->add_option("--passes", unc_passes)->capture_default_str();
  unc->add_option("--mc-dropout", unc_p, "inference dropout probability")->capture_default_str();
  unc->add_option("--out", unc_out, "output directory")->capture_default_str();

  // annotate-sim
  auto* sim = app.add_subcommand("annotate-sim", "simulated merge-sort annotation sweep");
  std::string sim_data, sim_out, sim_beta = "inf", sim_nsub = "6";
  std::size_t sim_n = 300;
  std::uint64_t sim_seed = 0;
  sim->add_option("--dataset", sim_data, "needs latent quality (synthetic if omitted)")
      ->check(CLI::ExistingFile);
  sim->add_option("--n", sim_n, "synthetic size when no dataset is given")->capture_default_str();
  sim->add_option("--beta", sim_beta, "comma list; 'inf' never errs")->capture_default_str();
  sim->add_option("--n-sub", sim_nsub, "comma list")->capture_default_str();
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("--out", sim_out, "CSV (default stdout)");

  // serve
  auto* srv = app.add_subcommand("serve", "run the annotation HTTP service");
  std::string listen = "127.0.0.1:8080", data_dir = "rankforge-data", image_source;
  srv->add_option("--listen", listen, "host:port")->envname("RANKFORGE_LISTEN")->capture_default_str();
  srv->add_option("--data-dir", data_dir)->envname("RANKFORGE_DATA_DIR")->capture_default_str();
  srv->add_option("--image-source", image_source, "image directory or URL template with {id}")
      ->envname("RANKFORGE_IMAGE_SOURCE");

  CLI11_PARSE(app, argc, argv);

  auto emit = [](const std::string& out, const std::string& text) {
    if (out.empty())
      std::cout << text;
    else
      write_artifact(out, text);
  };

  try {
    if (*gen) {
      if (basis == "linear")
        syn.nonlinearity = Nonlinearity::linear;
      else if (basis == "polynomial")
        syn.nonlinearity = Nonlinearity::polynomial;
      else
        throw std::invalid_argument("unknown basis '" + basis + "'");
      json cfg = {{"command", "generate"},
                  {"n", syn.n},
                  {"d", syn.d},
                  {"informative_dim", syn.informative_dim},
                  {"feature_noise_sigma", syn.feature_noise_sigma},
                  {"basis", basis},
                  {"seed", syn.seed}};
      RankedDataset ds = generate_synthetic(syn);
      if (!gen_beta.empty()) {
        const double beta = parse_beta(gen_beta);
        SimulationStats stats;
        ds = annotate_dataset(ds, beta, gen_nsub, syn.seed, &stats);
        cfg["annotation"] = {{"beta", beta_json(beta)},
                             {"n_sub", gen_nsub},
                             {"comparisons", stats.comparisons},
                             {"spc_vs_latent", stats.spc}};
      }
      fs::path tmp = gen_out;
      tmp += ".partial";
      if (tmp.has_parent_path()) fs::create_directories(tmp.parent_path());
      save_dataset(ds, tmp, cfg);
      fs::rename(tmp, gen_out);
    } else if (*train) {
      const RankedDataset ds = load_dataset(train_data);
      const TrainedModel model =
          train_method(parse_method(train_flags.method), ds, train_flags.config());
      fs::path tmp = train_out;
      tmp += ".partial";
      if (tmp.has_parent_path()) fs::create_directories(tmp.parent_path());
      save_checkpoint(model, tmp);
      fs::rename(tmp, train_out);
    } else if (*eval) {
      const RankedDataset ds = load_dataset(eval_data);
      const TrainedModel model = load_checkpoint(eval_model);
      const Truth truth = parse_truth(eval_truth);
      const auto scores = model_scores(model, ds);
      const auto report = evaluate(truth == Truth::latent ? latent_ranks(ds) : ds.ranks(), scores);
      const json cfg = {{"command", "eval"},
                        {"dataset", eval_data},
                        {"model", eval_model},
                        {"truth", to_string(truth)},
                        {"method", method_name(model.method)},
                        {"train", to_json(model.config)}};
      emit(eval_out, config_line(cfg) + metric_csv_header() + "\n" +
                         metric_csv_row(method_name(model.method), "all", report) + "\n");
    } else if (*cv) {
      const RankedDataset ds = load_dataset(cv_data);
      CvOptions opts;
      opts.method = parse_method(cv_flags.method);
      opts.k = cv_k;
      opts.train = cv_flags.config();
      opts.truth = parse_truth(cv_truth);
      emit(cv_out, cv_csv(run_cv(ds, opts), opts));
    } else if (*var) {
      const RankedDataset ds = load_dataset(var_data);
      CvOptions opts;
      opts.method = parse_method(var_flags.method);
      opts.k = var_k;
      opts.train = var_flags.config();
      opts.truth = parse_truth(var_truth);
      json cfg = to_json(opts);
      cfg["command"] = "variance";
      cfg["dataset"] = var_data;
      cfg["seeds"] = var_seeds;
      std::string out = config_line(cfg) + "method,seed,fold,spc\n";
      std::vector<double> all;
      const std::string name = method_name(opts.method);
      for (std::size_t i = 0; i < var_seeds; ++i) {
        CvOptions run = opts;
        run.train.seed = RngStream(var_flags.seed, 0).derive("variance").derive(i).next_u64();
        for (const auto& f : run_cv(ds, run)) {
          char row[128];
          std::snprintf(row, sizeof row, "%s,%llu,%zu,%.6f\n", name.c_str(),
                        static_cast<unsigned long long>(run.train.seed), f.fold, f.report.spc);
          out += row;
          all.push_back(f.report.spc);
        }
      }
      const MeanStd ms = mean_std(all);
      char row[128];
      std::snprintf(row, sizeof row, "%s,all,mean,%.6f\n%s,all,std,%.6f\n", name.c_str(), ms.mean,
                    name.c_str(), ms.std);
      emit(var_out, out + row);
    } else if (*unc) {
      const RankedDataset ds = load_dataset(unc_data);
      TrainedModel model;
      if (!unc_model.empty()) {
        model = load_checkpoint(unc_model);
      } else {
        model = train_method(Method::orbnet, ds, unc_flags.config());
      }
      if (model.method != Method::orbnet)
        throw std::invalid_argument("uncertainty needs an orbnet model, got " +
                                    method_name(model.method));
      const auto& params = std::get<OrbNetParams>(model.params);
      const std::size_t n = ds.size();
      for (const auto& a : split_list<std::string>(unc_anchors, [](const std::string& s) { return s; })) {
        const std::size_t pos = a == "last" ? n : std::stoul(a);
        if (pos < 1 || pos > n) throw std::invalid_argument("anchor position " + a + " outside 1..n");
        const int anchor_rank = static_cast<int>(n - pos + 1);
        std::string anchor_id;
        for (const auto& it : ds.items)
          if (it.rank == anchor_rank) anchor_id = it.id;
        const json cfg = {{"command", "uncertainty"},
                          {"dataset", unc_data},
                          {"model", unc_model.empty() ? json(nullptr) : json(unc_model)},
                          {"train", to_json(model.config)},
                          {"anchor_position", pos},
                          {"anchor_id", anchor_id},
                          {"anchor_rank", anchor_rank},
                          {"passes", unc_passes},
                          {"dropout_p", unc_p},
                          {"seed", unc_flags.seed}};
        const auto profile =
            confidence_profile(params, anchor_id, ds, unc_passes, unc_p, unc_flags.seed);
        write_artifact(fs::path(unc_out) / ("profile_anchor" + std::to_string(pos) + ".csv"),
                       config_line(cfg) + profile_csv(profile));
      }
    } else if (*sim) {
      const RankedDataset ds = dataset_or_synthetic(sim_data, sim_n, sim_seed);
      const auto betas = split_list<double>(sim_beta, parse_beta);
      const auto nsubs = split_list<std::size_t>(
          sim_nsub, [](const std::string& s) { return static_cast<std::size_t>(std::stoul(s)); });
      json beta_list = json::array();
      for (double b : betas) beta_list.push_back(beta_json(b));
      const json cfg = {{"command", "annotate-sim"},
                        {"dataset", sim_data.empty() ? json(nullptr) : json(sim_data)},
                        {"n", ds.size()},
                        {"beta", beta_list},
                        {"n_sub", nsubs},
                        {"seed", sim_seed}};
      std::string out = config_line(cfg) + "beta,n_sub,comparisons,compare_tasks,spc\n";
      for (double b : betas)
        for (std::size_t ns : nsubs) {
          SimulationStats st;
          annotate_dataset(ds, b, ns, sim_seed, &st);
          char row[160];
          std::snprintf(row, sizeof row, "%s,%zu,%zu,%zu,%.6f\n",
                        std::isinf(b) ? "inf" : std::to_string(b).c_str(), ns, st.comparisons,
                        st.compare_tasks, st.spc);
          out += row;
        }
      emit(sim_out, out);
    } else if (*srv) {
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw std::invalid_argument("--listen needs host:port");
      ServiceConfig sc;
      sc.data_dir = data_dir;
      sc.image_source = image_source;
      std::cerr << "rankforge: serving on " << listen << " (data in " << data_dir << ")\n";
      serve(sc, listen.substr(0, colon), std::stoi(listen.substr(colon + 1)));
    }
  } catch (const std::exception& e) {
    std::cerr << "rankforge: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
