#include "flowgrav/weights.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace flowgrav {

IsolatedPolicy isolated_policy_from_string(const std::string& s) {
  if (s == "warn") return IsolatedPolicy::Warn;
  if (s == "error") return IsolatedPolicy::Error;
  if (s == "nearest") return IsolatedPolicy::Nearest;
  throw Error("bad_option", "unknown isolated-unit policy '" + s + "'");
}

Matrix pairwise_distances(const Centroids& centroids) {
  centroids.validate();
  const Index n = centroids.n();
  if (n < 2) throw Error("too_few_units", "need at least 2 centroids");
  Matrix dist = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d = (centroids.coords.row(i) - centroids.coords.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  return dist;
}

Matrix cutoff_adjacency(const Matrix& dist, double d_c) {
  if (!(d_c > 0.0)) throw Error("bad_cutoff", "cutoff distance must be positive");
  const Index n = dist.rows();
  Matrix adj = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && dist(i, j) <= d_c) adj(i, j) = 1.0;
  return adj;
}

Matrix row_standardize(const Matrix& adjacency, std::vector<Index>* isolated) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw Error("dimension_mismatch", "adjacency must be square");
  Matrix w = Matrix::Zero(n, n);
  if (isolated) isolated->clear();
  for (Index i = 0; i < n; ++i) {
    const double rowsum = adjacency.row(i).sum();
    if (rowsum > 0.0)
      w.row(i) = adjacency.row(i) / rowsum;
    else if (isolated)
      isolated->push_back(i);
  }
  return w;
}

Vector spectrum(const Matrix& standardized) {
  const Index n = standardized.rows();
  if (standardized.cols() != n) throw Error("dimension_mismatch", "weight matrix must be square");

  // Recover the binary adjacency and degrees; the row-standardized matrix is
  // D^-1 A, similar to the symmetric D^-1/2 A D^-1/2 on non-isolated units,
  // so the spectrum is real. Isolated units contribute exact zeros.
  std::vector<Index> active;
  active.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i)
    if ((standardized.row(i).array() != 0.0).any()) active.push_back(i);

  Vector eig = Vector::Zero(n);
  if (!active.empty()) {
    const Index k = static_cast<Index>(active.size());
    Matrix adj(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b)
        adj(a, b) = standardized(active[static_cast<size_t>(a)],
                                 active[static_cast<size_t>(b)]) != 0.0
                        ? 1.0
                        : 0.0;
    if ((adj - adj.transpose()).cwiseAbs().maxCoeff() != 0.0)
      throw Error("asymmetric_weights", "underlying adjacency is not symmetric");
    Vector inv_sqrt_deg(k);
    for (Index a = 0; a < k; ++a) inv_sqrt_deg(a) = 1.0 / std::sqrt(adj.row(a).sum());
    const Matrix sym =
        inv_sqrt_deg.asDiagonal() * adj * inv_sqrt_deg.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw Error("eigensolver_failed", "eigenvalue computation did not converge");
    eig.head(k) = solver.eigenvalues();
  }
  std::sort(eig.begin(), eig.end());
  return eig;
}

SpatialWeights build_weights(const Centroids& centroids, double d_c, IsolatedPolicy policy,
                             std::ostream* warnings) {
  SpatialWeights w;
  w.ids = centroids.ids;
  w.d_c = d_c;
  const Matrix dist = pairwise_distances(centroids);
  w.adjacency = cutoff_adjacency(dist, d_c);

  std::vector<Index> isolated_idx;
  row_standardize(w.adjacency, &isolated_idx);
  if (!isolated_idx.empty() && policy == IsolatedPolicy::Nearest) {
    // k = 1 fallback: connect each isolated unit to its nearest neighbor.
    for (Index i : isolated_idx) {
      Index best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < dist.rows(); ++j)
        if (j != i && dist(i, j) < best_d) {
          best_d = dist(i, j);
          best = j;
        }
      w.adjacency(i, best) = 1.0;
      w.adjacency(best, i) = 1.0;
    }
    isolated_idx.clear();
  }
  w.standardized = row_standardize(w.adjacency, &isolated_idx);
  for (Index i : isolated_idx) w.isolated.push_back(w.ids[static_cast<size_t>(i)]);

  if (!w.isolated.empty()) {
    std::ostringstream msg;
    msg << w.isolated.size() << " unit(s) without a neighbor within " << d_c << " km:";
    for (const auto& id : w.isolated) msg << " " << id;
    if (policy == IsolatedPolicy::Error) throw Error("isolated_units", msg.str());
    if (warnings) *warnings << "warning: " << msg.str() << "\n";
  }

  w.spectrum = spectrum(w.standardized);
  return w;
}

}  // namespace flowgrav
