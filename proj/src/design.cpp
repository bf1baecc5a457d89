#include "flowgrav/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace flowgrav {

const char* to_string(Block b) {
  switch (b) {
    case Block::Intercept: return "intercept";
    case Block::O: return "O";
    case Block::D: return "D";
    case Block::OD: return "OD";
    case Block::LagD: return "W_D.D";
    case Block::LagOD: return "W_D.OD";
    case Block::Dummy: return "dummy";
  }
  return "?";
}

Index StackedDesign::find(const std::string& name) const {
  for (size_t k = 0; k < columns.size(); ++k)
    if (columns[k].name == name) return static_cast<Index>(k);
  return -1;
}

std::vector<std::string> StackedDesign::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

ZeroFlowPolicy zero_flow_policy_from_string(const std::string& s) {
  if (s == "error") return ZeroFlowPolicy::Error;
  if (s == "log1p") return ZeroFlowPolicy::Log1p;
  throw Error("bad_option", "unknown zero-flow policy '" + s + "'");
}

Vector vec_stack(const FlowMatrix& flows, ZeroFlowPolicy policy) {
  flows.validate();
  const Index n = flows.n(), m = flows.m();
  if (policy == ZeroFlowPolicy::Error) {
    std::ostringstream bad;
    int n_bad = 0;
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i)
        if (!(flows.values(i, j) > 0.0)) {
          if (n_bad++ < 20)
            bad << " (dest " << flows.dest_ids[static_cast<size_t>(i)] << ", origin "
                << flows.origin_ids[static_cast<size_t>(j)] << ")";
        }
    if (n_bad > 0)
      throw Error("zero_flow", std::to_string(n_bad) +
                                   " nonpositive flow(s); log is undefined. Cells:" + bad.str() +
                                   (n_bad > 20 ? " ..." : "") +
                                   ". Rerun with the log1p policy to use log(1+x).");
    // unaryExpr keeps libm's std::log, bit-identical to per-cell construction
    // on any SIMD target; Eigen's vectorized log may differ in the last ulp.
    return flows.values.reshaped().unaryExpr([](double v) { return std::log(v); });
  }
  return flows.values.reshaped().unaryExpr([](double v) { return std::log1p(v); });
}

Matrix expand_origin(const CovariateTable& x_o, Index n) {
  if (x_o.axis != Axis::Origin)
    throw Error("axis_mismatch",
                std::string("expand_origin needs an origin table, got ") + to_string(x_o.axis));
  Matrix raw(static_cast<Index>(x_o.ids.size()), static_cast<Index>(x_o.columns.size()));
  for (size_t c = 0; c < x_o.columns.size(); ++c) raw.col(static_cast<Index>(c)) = x_o.columns[c].values;
  return expand_origin_rows(raw, n);
}

Matrix expand_destination(const CovariateTable& x_d, Index m) {
  if (x_d.axis != Axis::Destination)
    throw Error("axis_mismatch", std::string("expand_destination needs a destination table, got ") +
                                     to_string(x_d.axis));
  Matrix raw(static_cast<Index>(x_d.ids.size()), static_cast<Index>(x_d.columns.size()));
  for (size_t c = 0; c < x_d.columns.size(); ++c) raw.col(static_cast<Index>(c)) = x_d.columns[c].values;
  return tile_destination_rows(raw, m);
}

Matrix flatten_od(const CovariateTable& x_od) {
  if (x_od.axis != Axis::OdPair)
    throw Error("axis_mismatch",
                std::string("flatten_od needs an od_pair table, got ") + to_string(x_od.axis));
  const Index n = static_cast<Index>(x_od.ids.size());
  const Index m = static_cast<Index>(x_od.origin_ids.size());
  Matrix out(n * m, static_cast<Index>(x_od.columns.size()));
  for (size_t c = 0; c < x_od.columns.size(); ++c) {
    const auto& col = x_od.columns[c];
    if (col.values.rows() != n || col.values.cols() != m)
      throw Error("dimension_mismatch", "od covariate '" + col.name + "' is " +
                                            std::to_string(col.values.rows()) + "x" +
                                            std::to_string(col.values.cols()) + ", expected " +
                                            std::to_string(n) + "x" + std::to_string(m));
    out.col(static_cast<Index>(c)) = flatten_od_matrix(col.values);
  }
  return out;
}

namespace {

// Elementwise transform of a raw covariate, validating the declaration.
Matrix apply_transform(const Covariate& col, const std::vector<std::string>& unit_ids,
                       const std::vector<std::string>& origin_ids) {
  switch (col.transform) {
    case Transform::Identity:
      return col.values;
    case Transform::Dummy:
      for (Index c = 0; c < col.values.cols(); ++c)
        for (Index r = 0; r < col.values.rows(); ++r)
          if (col.values(r, c) != 0.0 && col.values(r, c) != 1.0)
            throw Error("bad_dummy", "dummy column '" + col.name + "' contains " +
                                         std::to_string(col.values(r, c)));
      return col.values;
    case Transform::Log:
      for (Index c = 0; c < col.values.cols(); ++c)
        for (Index r = 0; r < col.values.rows(); ++r)
          if (!(col.values(r, c) > 0.0)) {
            std::string where = unit_ids[static_cast<size_t>(r)];
            if (!origin_ids.empty()) where += ", origin " + origin_ids[static_cast<size_t>(c)];
            throw Error("nonpositive_log", "covariate '" + col.name + "' declared log has value " +
                                               std::to_string(col.values(r, c)) + " at unit " + where);
          }
      return col.values.unaryExpr([](double v) { return std::log(v); });
  }
  throw Error("bad_transform", "unreachable");
}

void require_same_ids(const std::vector<std::string>& got, const std::vector<std::string>& want,
                      const std::string& what) {
  if (got == want) return;
  std::set<std::string> g(got.begin(), got.end()), w(want.begin(), want.end());
  std::ostringstream msg;
  msg << what << " ids do not match the flow matrix;";
  bool diff = false;
  for (const auto& id : w)
    if (!g.count(id)) {
      msg << " missing " << id;
      diff = true;
    }
  for (const auto& id : g)
    if (!w.count(id)) {
      msg << " unexpected " << id;
      diff = true;
    }
  if (!diff) msg << " same set, different order";
  throw Error("id_mismatch", msg.str());
}

}  // namespace

StackedDesign build_design(const FlowMatrix& flows, const std::vector<CovariateTable>& tables,
                           const SpatialWeights& weights, const ModelSpec& spec,
                           ZeroFlowPolicy zero_flow) {
  const Index n = flows.n(), m = flows.m(), N = n * m;
  require_same_ids(weights.ids, flows.dest_ids, "weight");

  // Locate every requested column across the tables; names must be unique.
  struct Picked {
    const CovariateTable* table;
    const Covariate* col;
  };
  std::vector<Picked> picked;
  for (const auto& name : spec.columns) {
    const CovariateTable* in = nullptr;
    const Covariate* col = nullptr;
    for (const auto& t : tables) {
      if (const Covariate* c = t.find(name)) {
        if (col) throw Error("duplicate_column", "covariate '" + name + "' declared in two tables");
        in = &t;
        col = c;
      }
    }
    if (!col) throw Error("unknown_column", "model '" + spec.name + "' references undeclared column '" + name + "'");
    picked.push_back({in, col});
  }
  {
    std::set<std::string> seen;
    for (const auto& name : spec.columns)
      if (!seen.insert(name).second)
        throw Error("duplicate_column", "column '" + name + "' listed twice in model '" + spec.name + "'");
  }

  for (const auto& t : tables) {
    t.validate();
    switch (t.axis) {
      case Axis::Origin: require_same_ids(t.ids, flows.origin_ids, "origin table"); break;
      case Axis::Destination: require_same_ids(t.ids, flows.dest_ids, "destination table"); break;
      case Axis::OdPair:
        require_same_ids(t.ids, flows.dest_ids, "od table destination");
        require_same_ids(t.origin_ids, flows.origin_ids, "od table origin");
        break;
    }
  }

  // Lag set: default every included destination/OD column; explicit sets may
  // not name origin-axis content (W_D only lags destination-varying columns).
  std::vector<std::string> lag_names;
  if (spec.lag) {
    for (const auto& name : *spec.lag) {
      auto it = std::find(spec.columns.begin(), spec.columns.end(), name);
      if (it == spec.columns.end())
        throw Error("unknown_column", "lag requested for '" + name + "' which is not an included column");
      const Picked& p = picked[static_cast<size_t>(it - spec.columns.begin())];
      if (p.table->axis == Axis::Origin)
        throw Error("lag_origin_column",
                    "lag requested for origin-axis column '" + name + "'; W_D lags only destination and OD columns");
      lag_names.push_back(name);
    }
    std::set<std::string> seen;
    for (const auto& name : lag_names)
      if (!seen.insert(name).second)
        throw Error("duplicate_column", "lag column '" + name + "' listed twice");
  } else {
    for (size_t k = 0; k < picked.size(); ++k)
      if (picked[k].table->axis != Axis::Origin) lag_names.push_back(spec.columns[k]);
  }

  StackedDesign design;
  design.n = n;
  design.m = m;
  design.model_name = spec.name;
  design.response = vec_stack(flows, zero_flow);
  design.response_transform = zero_flow == ZeroFlowPolicy::Log1p ? "log1p" : "log";

  // Stack each included column (transform first, then expand to length N).
  std::vector<Vector> stacked(picked.size());
  for (size_t k = 0; k < picked.size(); ++k) {
    const Picked& p = picked[k];
    const Matrix transformed = apply_transform(
        *p.col, p.table->ids, p.table->axis == Axis::OdPair ? p.table->origin_ids : std::vector<std::string>{});
    switch (p.table->axis) {
      case Axis::Origin: stacked[k] = expand_origin_rows(transformed, n); break;
      case Axis::Destination: stacked[k] = tile_destination_rows(transformed, m); break;
      case Axis::OdPair: stacked[k] = flatten_od_matrix(transformed); break;
    }
  }

  // Assemble in the fixed block order [intercept | O | D | OD | W_D.D | W_D.OD | dummies].
  std::vector<ColumnLabel> labels;
  std::vector<Vector> cols;
  labels.push_back({"(Intercept)", Block::Intercept});
  cols.push_back(Vector::Ones(N));

  auto append_block = [&](Axis axis, Block block) {
    for (size_t k = 0; k < picked.size(); ++k)
      if (picked[k].table->axis == axis) {
        labels.push_back({spec.columns[k], block});
        cols.push_back(stacked[k]);
      }
  };
  append_block(Axis::Origin, Block::O);
  append_block(Axis::Destination, Block::D);
  append_block(Axis::OdPair, Block::OD);

  auto append_lags = [&](Axis axis, Block block) {
    for (const auto& name : lag_names) {
      auto it = std::find(spec.columns.begin(), spec.columns.end(), name);
      const size_t k = static_cast<size_t>(it - spec.columns.begin());
      if (picked[k].table->axis != axis) continue;
      labels.push_back({"W_D " + name, block});
      cols.push_back(apply_destination_lag(weights.standardized, stacked[k], n, m));
    }
  };
  append_lags(Axis::Destination, Block::LagD);
  append_lags(Axis::OdPair, Block::LagOD);

  auto append_dummies = [&](const std::vector<std::string>& ids, bool per_origin,
                            const std::string& prefix) {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (size_t d = 1; d < sorted.size(); ++d) {  // first id in sort order is the reference
      const auto pos = std::find(ids.begin(), ids.end(), sorted[d]) - ids.begin();
      Vector col = Vector::Zero(N);
      if (per_origin)
        col.segment(static_cast<Index>(pos) * n, n).setOnes();
      else
        for (Index j = 0; j < m; ++j) col(j * n + static_cast<Index>(pos)) = 1.0;
      labels.push_back({prefix + "[" + sorted[d] + "]", Block::Dummy});
      cols.push_back(col);
    }
  };
  if (spec.origin_dummies) append_dummies(flows.origin_ids, true, "origin");
  if (spec.dest_dummies) append_dummies(flows.dest_ids, false, "dest");

  {
    std::set<std::string> seen;
    for (const auto& l : labels)
      if (!seen.insert(l.name).second)
        throw Error("duplicate_column", "duplicate design column '" + l.name + "'");
  }

  design.columns = labels;
  design.regressors.resize(N, static_cast<Index>(cols.size()));
  for (size_t k = 0; k < cols.size(); ++k) design.regressors.col(static_cast<Index>(k)) = cols[k];
  return design;
}

}  // namespace flowgrav
