#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "flowgrav/design.hpp"
#include "flowgrav/io.hpp"
#include "flowgrav/report.hpp"
#include "flowgrav/types.hpp"
#include "flowgrav/weights.hpp"

namespace flowgrav {

struct RunConfig {
  std::string flows_path;
  std::string origin_cov_path;  // optional
  std::string dest_cov_path;    // optional
  std::string od_cov_path;      // optional
  std::string centroids_path;
  double d_c = 120.0;
  std::vector<ModelSpec> models;
  std::string out_dir;  // empty: nothing written
  ZeroFlowPolicy zero_flow = ZeroFlowPolicy::Error;
  IsolatedPolicy isolated = IsolatedPolicy::Warn;
  bool project_lonlat = false;
};

struct Datasets {
  FlowMatrix flows;
  std::vector<CovariateTable> tables;
  Centroids centroids;
};

// Loads and cross-validates the CSV datasets: flow destination ids must match
// the centroid and destination-table ids, origin ids the origin table; OD
// tables must cover every pair. Mismatches report the symmetric difference.
// Tables and centroids are reordered to the flow matrix id order.
Datasets load_datasets(const RunConfig& cfg, std::ostream* log = nullptr);

// Model specs from a JSON document:
//   {"models": [{"name": "...", "columns": [...], "lag": "all"|"none"|[...],
//                "origin_dummies": false, "dest_dummies": false}, ...]}
std::vector<ModelSpec> parse_models_json(const std::string& text);
std::vector<ModelSpec> load_models_json(const std::string& path);

// Fits every model (OLS benchmark + SDEM), writes per-model JSON, the
// effects tables, and the multi-model report when out_dir is set.
std::vector<ModelReport> run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace flowgrav
