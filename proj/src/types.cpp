#include "flowgrav/types.hpp"

#include <cmath>
#include <set>

namespace flowgrav {

const char* to_string(Axis axis) {
  switch (axis) {
    case Axis::Origin: return "origin";
    case Axis::Destination: return "destination";
    case Axis::OdPair: return "od_pair";
  }
  return "?";
}

const char* to_string(Transform t) {
  switch (t) {
    case Transform::Log: return "log";
    case Transform::Identity: return "identity";
    case Transform::Dummy: return "dummy";
  }
  return "?";
}

Transform transform_from_string(const std::string& s) {
  if (s == "log") return Transform::Log;
  if (s == "identity") return Transform::Identity;
  if (s == "dummy") return Transform::Dummy;
  throw Error("bad_transform", "unknown transform '" + s + "' (expected log, identity or dummy)");
}

namespace detail {

void check_unique_ids(const std::vector<std::string>& ids, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second)
      throw Error("duplicate_id", "duplicate " + what + " id '" + id + "'");
}

}  // namespace detail

void FlowMatrix::validate() const {
  if (values.rows() != n() || values.cols() != m())
    throw Error("dimension_mismatch",
                "flow matrix is " + std::to_string(values.rows()) + "x" +
                    std::to_string(values.cols()) + " but has " + std::to_string(n()) +
                    " destination and " + std::to_string(m()) + " origin ids");
  detail::check_unique_ids(dest_ids, "destination");
  detail::check_unique_ids(origin_ids, "origin");
  for (Index j = 0; j < values.cols(); ++j)
    for (Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw Error("negative_flow", "flow (dest " + dest_ids[static_cast<size_t>(i)] +
                                         ", origin " + origin_ids[static_cast<size_t>(j)] +
                                         ") = " + std::to_string(v) + " is not a nonnegative number");
    }
}

void CovariateTable::validate() const {
  detail::check_unique_ids(ids, axis == Axis::OdPair ? "destination" : to_string(axis));
  if (axis == Axis::OdPair) detail::check_unique_ids(origin_ids, "origin");
  std::set<std::string> names;
  const Index len = static_cast<Index>(ids.size());
  for (const auto& col : columns) {
    if (!names.insert(col.name).second)
      throw Error("duplicate_column", "duplicate covariate name '" + col.name + "'");
    if (axis == Axis::OdPair) {
      if (col.values.rows() != len || col.values.cols() != static_cast<Index>(origin_ids.size()))
        throw Error("dimension_mismatch", "od covariate '" + col.name + "' is " +
                                              std::to_string(col.values.rows()) + "x" +
                                              std::to_string(col.values.cols()));
    } else {
      if (col.values.rows() != len || col.values.cols() != 1)
        throw Error("dimension_mismatch",
                    "covariate '" + col.name + "' has " + std::to_string(col.values.rows()) +
                        " rows for " + std::to_string(len) + " ids");
    }
    if (col.transform == Transform::Dummy) {
      for (Index c = 0; c < col.values.cols(); ++c)
        for (Index r = 0; r < col.values.rows(); ++r) {
          const double v = col.values(r, c);
          if (v != 0.0 && v != 1.0)
            throw Error("bad_dummy",
                        "dummy column '" + col.name + "' contains " + std::to_string(v));
        }
    }
  }
}

const Covariate* CovariateTable::find(const std::string& name) const {
  for (const auto& col : columns)
    if (col.name == name) return &col;
  return nullptr;
}

void Centroids::validate() const {
  detail::check_unique_ids(ids, "centroid");
  if (coords.rows() != n() || coords.cols() != 2)
    throw Error("dimension_mismatch", "centroid coordinates must be n x 2");
  if (!coords.allFinite()) throw Error("bad_coordinate", "non-finite centroid coordinate");
}

}  // namespace flowgrav
