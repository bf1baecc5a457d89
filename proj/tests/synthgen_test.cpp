#include <doctest.h>

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <cstdint>

#include "flowgrav/estimator.hpp"
#include "flowgrav/synthgen.hpp"

using namespace flowgrav;

TEST_CASE("splitmix64 reproduces the reference sequence") {
  // Outputs of the published finalizer for seed 0, cross-checked against an
  // independent implementation of the algorithm.
  SplitMix64 rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFull);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ull);
  CHECK(rng.next_u64() == 0x06C45D188009454Full);
  SplitMix64 rng42(42);
  CHECK(rng42.next_u64() == 0xBDD732262FEB6E95ull);
  CHECK(rng42.next_u64() == 0x28EFE333B266F103ull);
}

TEST_CASE("splitmix64 streams are deterministic and uniform draws live in [0,1)") {
  SplitMix64 a(987654321), b(987654321);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.next_uniform();
    CHECK(u == b.next_uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("fork depends only on seed and tag, not on draw position") {
  SplitMix64 fresh(77);
  SplitMix64 advanced(77);
  for (int i = 0; i < 13; ++i) advanced.next_normal();
  SplitMix64 s1 = fresh.fork(5);
  SplitMix64 s2 = advanced.fork(5);
  for (int i = 0; i < 50; ++i) CHECK(s1.next_u64() == s2.next_u64());
  // different tags give different streams
  CHECK(fresh.fork(6).next_u64() != fresh.fork(7).next_u64());
}

TEST_CASE("normal draws have the right first two moments") {
  SplitMix64 rng(2024);
  const int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("covariate law names round-trip") {
  for (CovariateLaw law : {CovariateLaw::StdNormal, CovariateLaw::Uniform01, CovariateLaw::LogNormal})
    CHECK(covariate_law_from_string(to_string(law)) == law);
  CHECK_THROWS_AS(covariate_law_from_string("cauchy"), Error);
}

TEST_CASE("config validation rejects out-of-range settings") {
  auto expect_code = [](DgpConfig cfg, const std::string& code) {
    try {
      cfg.validate();
      FAIL("expected an error with code " << code);
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  DgpConfig bad = DgpConfig::defaults();
  bad.n = 1;
  expect_code(bad, "bad_config");
  bad = DgpConfig::defaults();
  bad.lambda = 1.0;
  expect_code(bad, "bad_config");
  bad = DgpConfig::defaults();
  bad.sigma = -0.5;
  expect_code(bad, "bad_config");
  bad = DgpConfig::defaults();
  bad.n = 3;
  bad.m = 2;  // N = 6 < K + 2
  expect_code(bad, "bad_config");
  bad = DgpConfig::defaults();
  bad.columns.push_back({"dup", Axis::Destination, CovariateLaw::StdNormal, 0.1, 0.0});
  bad.columns.push_back({"dup", Axis::Destination, CovariateLaw::StdNormal, 0.1, 0.0});
  expect_code(bad, "duplicate_id");
  bad = DgpConfig::defaults();
  bad.columns.push_back({"pairwise", Axis::OdPair, CovariateLaw::StdNormal, 0.1, 0.0});
  expect_code(bad, "bad_config");
  DgpConfig ok = DgpConfig::defaults();
  ok.validate();  // defaults must be valid
}

TEST_CASE("blockwise error solve equals the dense Kronecker solve") {
  SplitMix64 rng(404);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.next_uniform() * 7);  // up to 8
    const Index m = 1 + static_cast<Index>(rng.next_uniform() * 4);  // up to 4
    Matrix w = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && rng.next_uniform() < 0.6) w(i, j) = 1.0;
    Matrix w_std = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      const double rs = w.row(i).sum();
      if (rs > 0.0) w_std.row(i) = w.row(i) / rs;
    }
    const double lambda = -0.8 + 1.6 * rng.next_uniform();
    Vector eps(n * m);
    for (Index i = 0; i < n * m; ++i) eps(i) = rng.next_normal();

    const Vector fast = detail::solve_sdem_errors(w_std, lambda, eps, n, m);

    Matrix big = Matrix::Zero(n * m, n * m);
    for (Index b = 0; b < m; ++b) big.block(b * n, b * n, n, n) = w_std;
    const Vector dense =
        (Matrix::Identity(n * m, n * m) - lambda * big).fullPivLu().solve(eps);
    CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fixed seed regenerates the instance bit for bit") {
  auto bits_equal = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
  };
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 31337;
  const SynthInstance a = gen_instance(cfg);
  const SynthInstance b = gen_instance(cfg);
  CHECK(bits_equal(a.design.response, b.design.response));
  CHECK(bits_equal(a.design.regressors, b.design.regressors));
  CHECK(bits_equal(a.weights.standardized, b.weights.standardized));
  CHECK(bits_equal(a.centroids.coords, b.centroids.coords));
  CHECK(bits_equal(a.origin_coords, b.origin_coords));
  CHECK(bits_equal(a.truth.values, b.truth.values));
  DgpConfig other = cfg;
  other.seed = 31338;
  CHECK_FALSE(bits_equal(gen_instance(other).design.response, a.design.response));
}

TEST_CASE("instance layout: columns, lags, truth alignment and flows") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 5;
  const SynthInstance inst = gen_instance(cfg);
  CHECK(inst.design.n == cfg.n);
  CHECK(inst.design.m == cfg.m);
  CHECK(inst.design.N() == cfg.n * cfg.m);

  // every configured column appears, and distance enters in logs with a lag
  REQUIRE(inst.truth.names.size() == static_cast<size_t>(inst.design.K()));
  bool saw_distance = false, saw_lag_distance = false;
  for (size_t k = 0; k < inst.truth.names.size(); ++k) {
    CHECK(inst.truth.names[k] == inst.design.columns[k].name);
    if (inst.truth.names[k] == "distance") saw_distance = true;
    if (inst.truth.names[k] == "W_D distance") saw_lag_distance = true;
  }
  CHECK(saw_distance);
  CHECK(saw_lag_distance);
  CHECK(inst.truth.lambda == cfg.lambda);
  CHECK(inst.truth.sigma2 == cfg.sigma * cfg.sigma);

  // intercept column leads and its truth value is the configured intercept
  CHECK(inst.design.columns[0].block == Block::Intercept);
  CHECK(inst.truth.values(0) == cfg.intercept);

  // flows are the exponentiated response in destination-major layout
  const FlowMatrix fm = inst.flows();
  CHECK(fm.values.rows() == cfg.n);
  CHECK(fm.values.cols() == cfg.m);
  const Vector back = fm.values.reshaped();
  for (Index i = 0; i < back.size(); ++i)
    CHECK(back(i) == doctest::Approx(std::exp(inst.design.response(i))).epsilon(1e-15));
}

TEST_CASE("lambda zero makes the errors plain white noise") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.n = 50;
  cfg.m = 25;  // N = 1250
  cfg.lambda = 0.0;
  cfg.seed = 8;
  const SynthInstance inst = gen_instance(cfg);
  const Vector u = inst.design.response - inst.design.regressors * inst.truth.values;
  const double mean = u.mean();
  const double var = (u.array() - mean).square().sum() / static_cast<double>(u.size() - 1);
  CHECK(std::abs(var - 1.0) < 0.1);  // within 10% of sigma^2 = 1
  // and within 3 standard errors of the chi-square sampling distribution
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(u.size() - 1)));
}

TEST_CASE("sigma zero gives the exact deterministic mean") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.sigma = 0.0;
  cfg.seed = 12;
  const SynthInstance inst = gen_instance(cfg);
  const Vector mean = inst.design.regressors * inst.truth.values;
  CHECK((inst.design.response - mean).cwiseAbs().maxCoeff() == 0.0);

  // the coefficients are recoverable to high precision from the noiseless design
  const Vector beta = (inst.design.regressors.transpose() * inst.design.regressors)
                          .ldlt()
                          .solve(inst.design.regressors.transpose() * inst.design.response);
  CHECK((beta - inst.truth.values).cwiseAbs().maxCoeff() < 1e-8);

  // a perfect fit is flagged rather than reported as a converged model
  CHECK_THROWS_AS(fit_sdem(inst.design, inst.weights), Error);
}

TEST_CASE("monte carlo summary is deterministic and thread-count invariant") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 99;
  const McSummary s1 = mc_study(cfg, 16, 1);
  const McSummary s2 = mc_study(cfg, 16, 4);
  REQUIRE(s1.params.size() == s2.params.size());
  for (size_t k = 0; k < s1.params.size(); ++k) {
    CHECK(s1.params[k].name == s2.params[k].name);
    CHECK(s1.params[k].mean == s2.params[k].mean);       // bitwise equal
    CHECK(s1.params[k].bias == s2.params[k].bias);
    CHECK(s1.params[k].rmse == s2.params[k].rmse);
    CHECK(s1.params[k].coverage95 == s2.params[k].coverage95);
  }
  CHECK(s1.failures == s2.failures);
  CHECK(s1.lr_reject_rate_05 == s2.lr_reject_rate_05);
  CHECK(s1.rng == "splitmix64");
}

TEST_CASE("monte carlo summaries satisfy the bookkeeping invariants") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 3;
  const McSummary s = mc_study(cfg, 12, 4);
  CHECK(s.replications == 12);
  CHECK(s.failures == 0);
  CHECK_FALSE(s.failed);
  REQUIRE(!s.params.empty());
  CHECK(s.params[s.params.size() - 2].name == "lambda");
  CHECK(s.params[s.params.size() - 1].name == "sigma2");
  for (const ParamSummary& p : s.params) {
    CHECK(p.coverage95 >= 0.0);
    CHECK(p.coverage95 <= 1.0);
    CHECK(p.rmse >= std::abs(p.bias) - 1e-12);
    CHECK(std::isfinite(p.mean));
  }
  CHECK(s.lr_reject_rate_05 >= 0.0);
  CHECK(s.lr_reject_rate_05 <= 1.0);
  CHECK_THROWS_AS(mc_study(cfg, 9), Error);  // fewer than 10 replications
}

TEST_CASE("a study where every fit degenerates is marked failed") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.sigma = 0.0;  // every replication is a perfect fit
  cfg.seed = 4;
  const McSummary s = mc_study(cfg, 10, 2);
  CHECK(s.failures == 10);
  CHECK(s.failed);
}

TEST_CASE("a small study finishes inside the performance budget") {
  const auto start = std::chrono::steady_clock::now();
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 21;
  const McSummary s = mc_study(cfg, 10, 1);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(s.replications == 10);
  CHECK(secs < 10.0);
}
