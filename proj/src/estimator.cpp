#include "flowgrav/estimator.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flowgrav/optimize.hpp"
#include "flowgrav/stats.hpp"

namespace flowgrav {

namespace {

constexpr double kRankTol = 1e-10;      // relative, column-pivoted QR
constexpr double kIntervalShrink = 1e-6;
constexpr double kBoundaryFrac = 1e-4;  // of the interval width

double gaussian_ml_loglik(double sigma2, Index N) {
  return -0.5 * static_cast<double>(N) * (std::log(2.0 * std::numbers::pi) + std::log(sigma2) + 1.0);
}

void check_not_degenerate(double sigma2, const Vector& y, Index N) {
  const double scale = y.squaredNorm() / static_cast<double>(N);
  if (!(sigma2 > std::max(1e-300, 1e-14 * scale)))
    throw Error("degenerate_fit", "residual variance is numerically zero (perfect fit); "
                                  "the Gaussian likelihood is unbounded");
}

}  // namespace

Index FitResult::find(const std::string& name) const {
  for (size_t k = 0; k < columns.size(); ++k)
    if (columns[k].name == name) return static_cast<Index>(k);
  return -1;
}

double FitResult::coefficient(const std::string& name) const {
  const Index k = find(name);
  if (k < 0) throw Error("unknown_column", "no coefficient named '" + name + "'");
  return coefficients(k);
}

double FitResult::std_error(const std::string& name) const {
  const Index k = find(name);
  if (k < 0) throw Error("unknown_column", "no coefficient named '" + name + "'");
  return std_errors(k);
}

double aic(double loglik, int n_params) {
  if (n_params < 1) throw Error("bad_option", "parameter count must be at least 1");
  return 2.0 * n_params - 2.0 * loglik;
}

double log_jacobian(double lambda, const Vector& spectrum, Index m) {
  double sum = 0.0;
  for (Index i = 0; i < spectrum.size(); ++i) {
    const double t = 1.0 - lambda * spectrum(i);
    if (!(t > 0.0))
      throw Error("lambda_infeasible", "1 - lambda*omega is not positive at omega = " +
                                           std::to_string(spectrum(i)));
    sum += std::log(t);
  }
  return static_cast<double>(m) * sum;
}

std::pair<double, double> feasible_lambda_interval(const Vector& spectrum) {
  if (spectrum.size() == 0) throw Error("bad_weights", "empty spectrum");
  const double omega_min = spectrum.minCoeff();
  const double omega_max = spectrum.maxCoeff();
  if (!(omega_min < -1e-12) || !(omega_max > 1e-12))
    throw Error("bad_weights",
                "weight matrix has no edges; the spatial coefficient is unidentified");
  return {1.0 / omega_min + kIntervalShrink, 1.0 / omega_max - kIntervalShrink};
}

namespace detail {

LsFit solve_ls(const Matrix& x, const Vector& y, const std::vector<ColumnLabel>& columns) {
  if (x.cols() >= x.rows())
    throw Error("underdetermined", "K = " + std::to_string(x.cols()) +
                                       " regressors for N = " + std::to_string(x.rows()) +
                                       " observations");
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(kRankTol);
  if (qr.rank() < x.cols()) {
    // Pivots beyond the numerical rank identify the collinear columns.
    std::ostringstream msg;
    msg << "design matrix is rank deficient (rank " << qr.rank() << " of " << x.cols()
        << "); collinear column(s):";
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = qr.rank(); k < x.cols(); ++k)
      msg << " '" << columns[static_cast<size_t>(perm(k))].name << "'";
    throw Error("rank_deficient", msg.str());
  }
  LsFit fit;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - x * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();
  return fit;
}

double FullLoglik::operator()(const Vector& coef, double lambda, double sigma2) const {
  const Index N = y->size();
  // (I - lambda W_D)(y - X b) = (y - lambda Ly) - (X - lambda LX) b
  Vector u = (*y - *x * coef) - lambda * (*lag_y - *lag_x * coef);
  return -0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi * sigma2) +
         log_jacobian(lambda, *spectrum, m) - 0.5 * u.squaredNorm() / sigma2;
}

Matrix finite_difference_hessian(const FullLoglik& ll, const Vector& coef, double lambda,
                                 double sigma2, double* max_asymmetry) {
  const Index K = coef.size();
  const Index P = K + 2;
  Vector p(P);
  p.head(K) = coef;
  p(K) = lambda;
  p(K + 1) = sigma2;

  Vector h(P);
  for (Index i = 0; i < P; ++i) h(i) = std::max(1e-5, 1e-5 * std::abs(p(i)));
  h(K + 1) = std::min(h(K + 1), sigma2 / 2.0);  // keep sigma^2 positive

  auto eval = [&](const Vector& q) { return ll(q.head(K), q(K), q(K + 1)); };

  const double f0 = eval(p);
  Matrix hess(P, P);
  for (Index i = 0; i < P; ++i) {
    Vector q = p;
    q(i) = p(i) + h(i);
    const double fp = eval(q);
    q(i) = p(i) - h(i);
    const double fm = eval(q);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
  }
  for (Index i = 0; i < P; ++i)
    for (Index j = i + 1; j < P; ++j) {
      Vector q = p;
      q(i) = p(i) + h(i);
      q(j) = p(j) + h(j);
      const double fpp = eval(q);
      q(j) = p(j) - h(j);
      const double fpm = eval(q);
      q(i) = p(i) - h(i);
      q(j) = p(j) + h(j);
      const double fmp = eval(q);
      q(j) = p(j) - h(j);
      const double fmm = eval(q);
      const double hij = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
      hess(i, j) = hij;
      hess(j, i) = hij;
    }
  if (max_asymmetry) *max_asymmetry = (hess - hess.transpose()).cwiseAbs().maxCoeff();
  return hess;
}

}  // namespace detail

FitResult fit_ols(const StackedDesign& design) {
  const Index N = design.N();
  const detail::LsFit ls = detail::solve_ls(design.regressors, design.response, design.columns);
  const double sigma2 = ls.rss / static_cast<double>(N);
  check_not_degenerate(sigma2, design.response, N);

  FitResult fit;
  fit.kind = FitResult::Kind::Linear;
  fit.model_name = design.model_name;
  fit.columns = design.columns;
  fit.coefficients = ls.coefficients;
  fit.sigma2 = sigma2;
  fit.loglik = gaussian_ml_loglik(sigma2, N);
  fit.n_params = static_cast<int>(design.K()) + 1;  // sigma^2 counted, lambda not
  fit.aic = aic(fit.loglik, fit.n_params);
  fit.N = N;
  fit.n = design.n;
  fit.m = design.m;

  const Matrix xtx_inv =
      (design.regressors.transpose() * design.regressors).ldlt().solve(Matrix::Identity(design.K(), design.K()));
  fit.std_errors = (sigma2 * xtx_inv.diagonal()).cwiseSqrt();
  return fit;
}

namespace {

// Pre-lagged copies of the design; every profile evaluation is then a plain
// least squares on (y - lambda Ly, X - lambda LX).
struct LaggedDesign {
  const StackedDesign* design;
  const SpatialWeights* weights;
  Vector lag_y;
  Matrix lag_x;

  LaggedDesign(const StackedDesign& d, const SpatialWeights& w) : design(&d), weights(&w) {
    if (w.n() != d.n)
      throw Error("dimension_mismatch", "weights built over " + std::to_string(w.n()) +
                                            " units, design has n = " + std::to_string(d.n));
    lag_y = apply_destination_lag(w.standardized, d.response, d.n, d.m);
    lag_x = apply_destination_lag(w.standardized, d.regressors, d.n, d.m);
  }

  detail::LsFit gls_at(double lambda) const {
    const Vector y_star = design->response - lambda * lag_y;
    const Matrix x_star = design->regressors - lambda * lag_x;
    return detail::solve_ls(x_star, y_star, design->columns);
  }

  double profile(double lambda) const {
    const detail::LsFit ls = gls_at(lambda);
    const Index N = design->N();
    const double sigma2 = ls.rss / static_cast<double>(N);
    check_not_degenerate(sigma2, design->response, N);
    return gaussian_ml_loglik(sigma2, N) + log_jacobian(lambda, weights->spectrum, design->m);
  }
};

}  // namespace

double concentrated_loglik(double lambda, const StackedDesign& design,
                           const SpatialWeights& weights) {
  const auto [lo, hi] = feasible_lambda_interval(weights.spectrum);
  if (lambda < lo - kIntervalShrink || lambda > hi + kIntervalShrink)
    throw Error("lambda_infeasible", "lambda = " + std::to_string(lambda) +
                                         " outside feasible interval (" + std::to_string(lo) +
                                         ", " + std::to_string(hi) + ")");
  return LaggedDesign(design, weights).profile(lambda);
}

Vector standard_errors(const FitResult& fit, const StackedDesign& design,
                       const SpatialWeights& weights) {
  LaggedDesign lagged(design, weights);
  detail::FullLoglik ll{&design.regressors, &design.response, &lagged.lag_x,
                        &lagged.lag_y,      &weights.spectrum, design.m};
  const double lambda = fit.kind == FitResult::Kind::Sdem ? fit.lambda : 0.0;
  const Matrix hess = detail::finite_difference_hessian(ll, fit.coefficients, lambda, fit.sigma2);
  const Index P = hess.rows();
  Eigen::LDLT<Matrix> neg_hess((-hess).eval());
  const Matrix cov = neg_hess.solve(Matrix::Identity(P, P));
  Vector var = cov.diagonal();
  if (neg_hess.info() != Eigen::Success || !neg_hess.isPositive() || (var.array() <= 0.0).any())
    throw Error("information_not_pd", "information matrix not PD; standard errors undefined");
  return var.cwiseSqrt();
}

Vector gls_std_errors(const FitResult& fit, const StackedDesign& design,
                      const SpatialWeights& weights) {
  LaggedDesign lagged(design, weights);
  const double lambda = fit.kind == FitResult::Kind::Sdem ? fit.lambda : 0.0;
  const Matrix x_star = design.regressors - lambda * lagged.lag_x;
  const Matrix xtx_inv =
      (x_star.transpose() * x_star).ldlt().solve(Matrix::Identity(design.K(), design.K()));
  return (fit.sigma2 * xtx_inv.diagonal()).cwiseSqrt();
}

FitResult fit_sdem(const StackedDesign& design, const SpatialWeights& weights,
                   const SdemOptions& opts) {
  LaggedDesign lagged(design, weights);
  const auto [lo, hi] = feasible_lambda_interval(weights.spectrum);

  double lambda_hat;
  if (opts.pin_lambda) {
    lambda_hat = *opts.pin_lambda;
    if (lambda_hat < lo - kIntervalShrink || lambda_hat > hi + kIntervalShrink)
      throw Error("lambda_infeasible", "pinned lambda outside feasible interval");
  } else {
    const ScalarOptResult opt =
        maximize_scalar([&](double l) { return lagged.profile(l); }, lo, hi, opts.lambda_tol);
    lambda_hat = opt.x;
    const double margin = kBoundaryFrac * (hi - lo);
    if (lambda_hat - lo < margin || hi - lambda_hat < margin)
      throw Error("boundary_solution",
                  "lambda converged to the feasible-interval boundary (lambda = " +
                      std::to_string(lambda_hat) +
                      "); check the weight matrix or the dependence structure");
  }

  const detail::LsFit gls = lagged.gls_at(lambda_hat);
  const Index N = design.N();
  const double sigma2 = gls.rss / static_cast<double>(N);
  check_not_degenerate(sigma2, design.response, N);

  FitResult fit;
  fit.kind = FitResult::Kind::Sdem;
  fit.model_name = design.model_name;
  fit.columns = design.columns;
  fit.coefficients = gls.coefficients;
  fit.lambda = lambda_hat;
  fit.sigma2 = sigma2;
  fit.loglik = gaussian_ml_loglik(sigma2, N) + log_jacobian(lambda_hat, weights.spectrum, design.m);
  fit.n_params = static_cast<int>(design.K()) + 2;  // sigma^2 and lambda
  fit.aic = aic(fit.loglik, fit.n_params);
  fit.N = N;
  fit.n = design.n;
  fit.m = design.m;

  if (opts.compute_std_errors) {
    if (opts.pin_lambda) {
      // With lambda held fixed the information is block diagonal in
      // (coefficients, sigma^2); the closed forms apply.
      fit.std_errors = gls_std_errors(fit, design, weights);
      fit.sigma2_se = sigma2 * std::sqrt(2.0 / static_cast<double>(N));
    } else {
      const Vector se = standard_errors(fit, design, weights);
      fit.std_errors = se.head(design.K());
      fit.lambda_se = se(design.K());
      fit.sigma2_se = se(design.K() + 1);
    }
  } else {
    fit.std_errors = Vector::Constant(design.K(), std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

LrTest lr_test(const FitResult& linear, const FitResult& sdem) {
  if (linear.kind != FitResult::Kind::Linear || sdem.kind != FitResult::Kind::Sdem)
    throw Error("bad_option", "lr_test expects (linear, sdem) in that order");
  if (linear.N != sdem.N)
    throw Error("not_nested", "models fitted on different numbers of observations");
  double stat = 2.0 * (sdem.loglik - linear.loglik);
  if (stat < 0.0) {
    if (stat < -1e-9)
      throw Error("not_nested", "SDEM log-likelihood below the linear benchmark (statistic " +
                                    std::to_string(stat) + "); models are not nested");
    stat = 0.0;
  }
  return {stat, 1, chi2_upper_tail_df1(stat)};
}

std::vector<EffectRow> effects_split(const FitResult& fit) {
  if (fit.kind != FitResult::Kind::Sdem)
    throw Error("bad_option", "effects_split expects an SDEM fit");
  std::vector<EffectRow> rows;
  for (size_t k = 0; k < fit.columns.size(); ++k) {
    const ColumnLabel& c = fit.columns[k];
    if (c.block != Block::D && c.block != Block::OD) continue;
    EffectRow row;
    row.name = c.name;
    row.direct = fit.coefficients(static_cast<Index>(k));
    row.direct_se = fit.std_errors(static_cast<Index>(k));
    row.direct_p = row.direct_se > 0.0 ? normal_two_sided_p(row.direct / row.direct_se) : 1.0;
    row.total = row.direct;
    const Index lag = fit.find("W_D " + c.name);
    if (lag >= 0) {
      row.has_spillover = true;
      row.spillover = fit.coefficients(lag);
      row.spillover_se = fit.std_errors(lag);
      row.spillover_p =
          row.spillover_se > 0.0 ? normal_two_sided_p(row.spillover / row.spillover_se) : 1.0;
      row.total += row.spillover;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flowgrav
