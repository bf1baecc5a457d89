#pragma once

#include <map>
#include <string>
#include <vector>

#include "flowgrav/synthgen.hpp"
#include "flowgrav/types.hpp"
#include "flowgrav/weights.hpp"

namespace flowgrav {

// CSV schemas (headers mandatory):
//   flows       long form   dest_id,origin_id,value
//   covariates  wide form   #transform: var1=log,var2=identity,...
//                           id,var1,var2,...
//   od          long form   dest_id,origin_id,var1[,var2,...]  (same #transform line)
//   centroids               id,x_km,y_km
// Cells must be numeric and present; validation errors name the offending cell.

FlowMatrix load_flows_csv(const std::string& path);
CovariateTable load_covariates_csv(const std::string& path, Axis axis);
CovariateTable load_od_csv(const std::string& path);
Centroids load_centroids_csv(const std::string& path, bool project_lonlat = false);

void write_flows_csv(const FlowMatrix& flows, const std::string& path);
void write_covariates_csv(const CovariateTable& table, const std::string& path);
void write_centroids_csv(const Centroids& centroids, const std::string& path);

// Standardized weights as i,j,w triplets preceded by a metadata line with the
// cutoff and the isolated ids.
std::string weights_to_csv(const SpatialWeights& w);
void write_weights_csv(const SpatialWeights& w, const std::string& path);

// Plain-text key-value study configs: `key = value`, '#' comments. Unknown
// keys are rejected.
DgpConfig load_dgp_config(const std::string& path);
DgpConfig parse_dgp_config(const std::string& text);

std::string mc_summary_to_csv(const McSummary& s);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

namespace detail {
std::vector<std::string> split_csv_line(const std::string& line);
double parse_number(const std::string& cell, const std::string& where);
}  // namespace detail

}  // namespace flowgrav
