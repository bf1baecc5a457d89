#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "flowgrav/types.hpp"
#include "flowgrav/weights.hpp"

namespace flowgrav {

enum class Block { Intercept, O, D, OD, LagD, LagOD, Dummy };

const char* to_string(Block b);

struct ColumnLabel {
  std::string name;
  Block block;
};

// The stacked gravity system: response nv = vec(log NV) of length N = n*m and
// the regressor matrix with labeled column blocks. Observations are grouped in
// m origin blocks of size n (column-major stacking of the n x m flow matrix).
struct StackedDesign {
  Vector response;
  Matrix regressors;
  std::vector<ColumnLabel> columns;
  Index n = 0, m = 0;
  std::string model_name;
  std::string response_transform = "log";  // "log" or "log1p"

  Index N() const { return n * m; }
  Index K() const { return regressors.cols(); }
  Index find(const std::string& name) const;  // -1 if absent
  std::vector<std::string> names() const;
};

enum class ZeroFlowPolicy { Error, Log1p };

ZeroFlowPolicy zero_flow_policy_from_string(const std::string& s);

// vec(log NV): element (j-1)*n + i is log flows(i, j). Zero or negative flows
// are rejected with the offending cell named unless the log1p policy is chosen,
// which substitutes log(1 + x) for the response only.
Vector vec_stack(const FlowMatrix& flows, ZeroFlowPolicy policy = ZeroFlowPolicy::Error);

// Kronecker kernels. expand_origin_rows is X_O (x) 1_n (each row repeated n
// times); tile_destination_rows is 1_m (x) X_D (the block tiled m times).
template <typename Derived>
Matrix expand_origin_rows(const Eigen::MatrixBase<Derived>& x_o, Index n) {
  Matrix out(x_o.rows() * n, x_o.cols());
  for (Index j = 0; j < x_o.rows(); ++j) out.middleRows(j * n, n) = x_o.row(j).replicate(n, 1);
  return out;
}

template <typename Derived>
Matrix tile_destination_rows(const Eigen::MatrixBase<Derived>& x_d, Index m) {
  return x_d.replicate(m, 1);
}

template <typename Derived>
Vector flatten_od_matrix(const Eigen::MatrixBase<Derived>& values) {
  return values.reshaped();  // column-major, matching vec_stack
}

// Table-level variants with axis and dimension checks; transforms are not
// applied here (build_design transforms before expanding).
Matrix expand_origin(const CovariateTable& x_o, Index n);
Matrix expand_destination(const CovariateTable& x_d, Index m);
Matrix flatten_od(const CovariateTable& x_od);

// One model of the pipeline: which declared covariates enter, which of the
// destination/OD columns get a W_D lag (default: all of them), and optional
// fixed-effect dummy blocks (first id in sort order is the dropped reference).
struct ModelSpec {
  std::string name;
  std::vector<std::string> columns;
  std::optional<std::vector<std::string>> lag;  // nullopt = lag every D/OD column
  bool origin_dummies = false;
  bool dest_dummies = false;
};

StackedDesign build_design(const FlowMatrix& flows, const std::vector<CovariateTable>& tables,
                           const SpatialWeights& weights, const ModelSpec& spec,
                           ZeroFlowPolicy zero_flow = ZeroFlowPolicy::Error);

}  // namespace flowgrav
