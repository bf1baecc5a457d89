#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "flowgrav/io.hpp"
#include "flowgrav/pipeline.hpp"
#include "flowgrav/report.hpp"
#include "flowgrav/synthgen.hpp"

namespace {

using flowgrav::Error;

int fail(const std::string& code, const std::string& message) {
  nlohmann::ordered_json err;
  err["error"] = code;
  err["message"] = message;
  std::cerr << err.dump() << '\n';
  return 1;
}

struct WeightsArgs {
  std::string centroids;
  double cutoff_km = 120.0;
  std::string isolated = "warn";
  bool project_lonlat = false;
  std::string out;
};

int run_weights(const WeightsArgs& a) {
  const flowgrav::Centroids centroids =
      flowgrav::load_centroids_csv(a.centroids, a.project_lonlat);
  const flowgrav::SpatialWeights w = flowgrav::build_weights(
      centroids, a.cutoff_km, flowgrav::isolated_policy_from_string(a.isolated), &std::cerr);
  Eigen::Index edges = 0;
  for (Eigen::Index i = 0; i < w.n(); ++i)
    for (Eigen::Index j = 0; j < w.n(); ++j) edges += w.adjacency(i, j) != 0.0;
  std::cerr << w.n() << " units, " << edges / 2 << " neighbor pairs at " << a.cutoff_km
            << " km, " << w.isolated.size() << " isolated\n";
  if (a.out.empty())
    std::cout << flowgrav::weights_to_csv(w);
  else
    flowgrav::write_weights_csv(w, a.out);
  return 0;
}

struct EstimateArgs {
  flowgrav::RunConfig cfg;
  std::string models_path;
  std::string zero_flow = "error";
  std::string isolated = "warn";
};

int run_estimate(EstimateArgs& a) {
  a.cfg.models = flowgrav::load_models_json(a.models_path);
  a.cfg.zero_flow = flowgrav::zero_flow_policy_from_string(a.zero_flow);
  a.cfg.isolated = flowgrav::isolated_policy_from_string(a.isolated);
  const auto reports = flowgrav::run_pipeline(a.cfg, &std::cerr);
  std::cout << flowgrav::render_text_table(reports);
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  flowgrav::DgpConfig cfg =
      a.config.empty() ? flowgrav::DgpConfig::defaults() : flowgrav::load_dgp_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const flowgrav::SynthInstance inst = flowgrav::gen_instance(cfg);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw Error("io_error", "cannot create '" + a.out_dir + "': " + ec.message());
  const fs::path dir(a.out_dir);

  flowgrav::write_flows_csv(inst.flows(), (dir / "flows.csv").string());
  flowgrav::write_centroids_csv(inst.centroids, (dir / "centroids.csv").string());
  for (const auto& table : inst.tables) {
    const char* name = table.axis == flowgrav::Axis::Origin
                           ? "origin_covariates.csv"
                           : (table.axis == flowgrav::Axis::Destination ? "dest_covariates.csv"
                                                                        : "od_covariates.csv");
    flowgrav::write_covariates_csv(table, (dir / name).string());
  }

  nlohmann::ordered_json models;
  models["models"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json spec;
  spec["name"] = inst.model.name;
  spec["columns"] = inst.model.columns;
  spec["lag"] = "all";
  models["models"].push_back(spec);
  flowgrav::write_text_file((dir / "models.json").string(), models.dump(2) + "\n");

  nlohmann::ordered_json truth;
  truth["rng"] = flowgrav::SplitMix64::name();
  truth["seed"] = cfg.seed;
  truth["names"] = inst.truth.names;
  auto values = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < inst.truth.values.size(); ++k)
    values.push_back(inst.truth.values(k));
  truth["values"] = values;
  truth["lambda"] = inst.truth.lambda;
  truth["sigma2"] = inst.truth.sigma2;
  truth["cutoff_km"] = cfg.d_c;
  flowgrav::write_text_file((dir / "truth.json").string(), truth.dump(2) + "\n");

  std::cerr << "wrote " << inst.design.n << "x" << inst.design.m << " instance to " << a.out_dir
            << '\n';
  return 0;
}

struct McArgs {
  std::string config;
  int replications = 200;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string json_out;
};

int run_mc(const McArgs& a) {
  flowgrav::DgpConfig cfg =
      a.config.empty() ? flowgrav::DgpConfig::defaults() : flowgrav::load_dgp_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const flowgrav::McSummary summary = flowgrav::mc_study(cfg, a.replications, a.threads);
  const std::string csv = flowgrav::mc_summary_to_csv(summary);
  if (a.out.empty())
    std::cout << csv;
  else
    flowgrav::write_text_file(a.out, csv);
  if (!a.json_out.empty())
    flowgrav::write_text_file(a.json_out, flowgrav::mc_summary_to_json(summary).dump(2) + "\n");
  if (summary.failed) {
    std::cerr << summary.failures << " of " << summary.replications
              << " replications failed to converge\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Origin-destination flow estimation with spatial Durbin error models"};
  app.require_subcommand(1);

  WeightsArgs wa;
  CLI::App* weights = app.add_subcommand("weights", "Build cutoff spatial weights from centroids");
  weights->add_option("--centroids", wa.centroids, "centroid CSV (id,x_km,y_km)")->required();
  weights->add_option("--cutoff-km", wa.cutoff_km, "neighbor distance cutoff (km)");
  weights->add_option("--isolated", wa.isolated, "isolated-unit policy: warn, error or nearest");
  weights->add_flag("--project-lonlat", wa.project_lonlat, "accept id,lon,lat and project to km");
  weights->add_option("--out", wa.out, "output CSV (default: stdout)");

  EstimateArgs ea;
  CLI::App* estimate = app.add_subcommand("estimate", "Fit OLS and SDEM models to a dataset");
  estimate->add_option("--flows", ea.cfg.flows_path, "flow CSV (dest_id,origin_id,value)")
      ->required();
  estimate->add_option("--centroids", ea.cfg.centroids_path, "centroid CSV")->required();
  estimate->add_option("--models", ea.models_path, "model specs JSON")->required();
  estimate->add_option("--origin-covariates", ea.cfg.origin_cov_path, "origin covariate CSV");
  estimate->add_option("--dest-covariates", ea.cfg.dest_cov_path, "destination covariate CSV");
  estimate->add_option("--od-covariates", ea.cfg.od_cov_path, "od-pair covariate CSV");
  estimate->add_option("--cutoff-km", ea.cfg.d_c, "neighbor distance cutoff (km)");
  estimate->add_option("--zero-flow", ea.zero_flow, "zero-flow policy: error or log1p");
  estimate->add_option("--isolated", ea.isolated, "isolated-unit policy: warn, error or nearest");
  estimate->add_flag("--project-lonlat", ea.cfg.project_lonlat,
                     "accept id,lon,lat centroids and project to km");
  estimate->add_option("--out-dir", ea.cfg.out_dir, "directory for the report bundle");

  SimulateArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate one synthetic dataset");
  simulate->add_option("--config", sa.config, "key=value study config");
  simulate->add_option("--out-dir", sa.out_dir, "output directory")->required();
  simulate->add_option("--seed", sa.seed, "override the config seed");

  McArgs ma;
  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo parameter-recovery study");
  mc->add_option("--config", ma.config, "key=value study config");
  mc->add_option("-R,--replications", ma.replications, "number of replications");
  mc->add_option("--threads", ma.threads, "worker threads (summary is thread-count invariant)");
  mc->add_option("--seed", ma.seed, "override the config seed");
  mc->add_option("--out", ma.out, "summary CSV path (default: stdout)");
  mc->add_option("--json", ma.json_out, "also write the summary as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (weights->parsed()) return run_weights(wa);
    if (estimate->parsed()) return run_estimate(ea);
    if (simulate->parsed()) return run_simulate(sa);
    if (mc->parsed()) return run_mc(ma);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
