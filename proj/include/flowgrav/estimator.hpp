#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flowgrav/design.hpp"
#include "flowgrav/types.hpp"
#include "flowgrav/weights.hpp"

namespace flowgrav {

// One fitted model: the machine form of one column of a results table.
struct FitResult {
  enum class Kind { Linear, Sdem };

  Kind kind = Kind::Linear;
  std::string model_name;
  std::vector<ColumnLabel> columns;
  Vector coefficients;
  Vector std_errors;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double lambda_se = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = 0.0;
  double sigma2_se = std::numeric_limits<double>::quiet_NaN();
  double loglik = 0.0;
  int n_params = 0;  // includes sigma^2, and lambda for the SDEM
  double aic = 0.0;
  Index N = 0, n = 0, m = 0;

  Index find(const std::string& name) const;
  double coefficient(const std::string& name) const;
  double std_error(const std::string& name) const;
};

struct LrTest {
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
};

struct SdemOptions {
  double lambda_tol = 1e-8;
  std::optional<double> pin_lambda;  // fixes lambda instead of profiling (no lambda SE)
  bool compute_std_errors = true;
};

double aic(double loglik, int n_params);

// log |I_N - lambda * (I_m (x) W)| = m * sum_i log(1 - lambda * omega_i),
// where omega are the eigenvalues of the row-standardized W.
double log_jacobian(double lambda, const Vector& spectrum, Index m);

// Open interval of lambda on which every 1 - lambda*omega_i stays positive,
// shrunk by 1e-6 at both ends to keep the Jacobian finite.
std::pair<double, double> feasible_lambda_interval(const Vector& spectrum);

// Gaussian ML least squares: the non-spatial benchmark. sigma^2 is the ML
// variant e'e / N, n_params = K + 1.
FitResult fit_ols(const StackedDesign& design);

// Profile log-likelihood of the SDEM at a given lambda: GLS-transform the
// response and regressors with (I - lambda W_D), regress, and add the
// log-Jacobian. The transform is applied blockwise, never as an N x N matrix.
double concentrated_loglik(double lambda, const StackedDesign& design,
                           const SpatialWeights& weights);

FitResult fit_sdem(const StackedDesign& design, const SpatialWeights& weights,
                   const SdemOptions& opts = {});

// Asymptotic standard errors from the inverse negative Hessian of the full
// log-likelihood in (coefficients, lambda, sigma^2), by central finite
// differences. Returns K+2 entries in that order.
Vector standard_errors(const FitResult& fit, const StackedDesign& design,
                       const SpatialWeights& weights);

// Closed-form GLS covariance route sigma^2 (X*'X*)^-1 for the coefficient
// block; the independent cross-check of the Hessian-based errors.
Vector gls_std_errors(const FitResult& fit, const StackedDesign& design,
                      const SpatialWeights& weights);

LrTest lr_test(const FitResult& linear, const FitResult& sdem);

// Direct effect (beta), local spillover (theta) and total effect per
// destination/OD variable of an SDEM fit.
struct EffectRow {
  std::string name;
  double direct = 0.0, direct_se = 0.0, direct_p = 1.0;
  bool has_spillover = false;
  double spillover = 0.0, spillover_se = 0.0, spillover_p = 1.0;
  double total = 0.0;
};

std::vector<EffectRow> effects_split(const FitResult& fit);

namespace detail {

// Least squares via column-pivoted QR with relative rank tolerance 1e-10;
// rank deficiency names the collinear columns.
struct LsFit {
  Vector coefficients;
  Vector residuals;
  double rss = 0.0;
};
LsFit solve_ls(const Matrix& x, const Vector& y, const std::vector<ColumnLabel>& columns);

// Full SDEM log-likelihood at (coefficients, lambda, sigma2) given the
// pre-lagged design; used by the finite-difference Hessian.
struct FullLoglik {
  const Matrix* x;        // N x K
  const Vector* y;        // N
  const Matrix* lag_x;    // W_D X
  const Vector* lag_y;    // W_D y
  const Vector* spectrum; // eigenvalues of W
  Index m = 0;
  double operator()(const Vector& coef, double lambda, double sigma2) const;
};

Matrix finite_difference_hessian(const FullLoglik& ll, const Vector& coef, double lambda,
                                 double sigma2, double* max_asymmetry = nullptr);

}  // namespace detail

}  // namespace flowgrav
