#pragma once

#include <Eigen/Dense>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flowgrav/types.hpp"

namespace flowgrav {

// Cutoff-distance spatial weights over the n destination units. The stacked
// operator applied to origin-destination data is block diagonal, I_m (x) W,
// so only the n x n matrix is ever stored.
struct SpatialWeights {
  Matrix adjacency;     // binary, symmetric, zero diagonal
  Matrix standardized;  // rows sum to 1, or to 0 for isolated units
  Vector spectrum;      // eigenvalues of `standardized`, ascending; real by construction
  double d_c = 0.0;     // cutoff distance (km)
  std::vector<std::string> ids;
  std::vector<std::string> isolated;

  Index n() const { return adjacency.rows(); }
};

enum class IsolatedPolicy { Warn, Error, Nearest };

IsolatedPolicy isolated_policy_from_string(const std::string& s);

Matrix pairwise_distances(const Centroids& centroids);

// w_ij = 1 iff d_ij <= d_c and i != j. The boundary d_ij = d_c is a neighbor.
Matrix cutoff_adjacency(const Matrix& dist, double d_c);

// Divides each nonzero row by its sum; zero rows are kept and reported.
Matrix row_standardize(const Matrix& adjacency, std::vector<Index>* isolated = nullptr);

// Eigenvalues of the row-standardized matrix, sorted ascending. They are real
// because D^-1 A is similar to the symmetric D^-1/2 A D^-1/2 on the non-isolated
// units; isolated units contribute exact zeros.
Vector spectrum(const Matrix& standardized);

SpatialWeights build_weights(const Centroids& centroids, double d_c,
                             IsolatedPolicy policy = IsolatedPolicy::Warn,
                             std::ostream* warnings = nullptr);

// Applies I_m (x) W to a stacked N = n*m vector (or to each column of an N x k
// matrix) without materializing the N x N operator. Block j of the output is
// W times block j of the input.
template <typename DerivedW, typename DerivedX>
Matrix apply_destination_lag(const Eigen::MatrixBase<DerivedW>& w_std,
                             const Eigen::MatrixBase<DerivedX>& x, Index n, Index m) {
  if (w_std.rows() != n || w_std.cols() != n)
    throw Error("dimension_mismatch", "weight matrix is " + std::to_string(w_std.rows()) + "x" +
                                          std::to_string(w_std.cols()) + ", expected " +
                                          std::to_string(n) + "x" + std::to_string(n));
  if (x.rows() != n * m)
    throw Error("dimension_mismatch", "stacked input has length " + std::to_string(x.rows()) +
                                          ", expected n*m = " + std::to_string(n * m));
  Matrix out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    Vector col = x.col(c);
    out.col(c) = (w_std * col.reshaped(n, m)).reshaped();
  }
  return out;
}

}  // namespace flowgrav
