#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowgrav/design.hpp"
#include "flowgrav/estimator.hpp"
#include "flowgrav/types.hpp"
#include "flowgrav/weights.hpp"

namespace flowgrav {

// Counter-based generator: output i is the SplitMix64 finalizer applied to
// seed + i * 2^64/phi. Streams are cheap to derive and fully reproducible;
// the generator name is recorded in study metadata.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal by Box-Muller; pairs are cached for determinism.
  double next_normal();

  // Substream keyed by a tag; independent of draws made on this stream.
  SplitMix64 fork(std::uint64_t tag) const;

  static constexpr const char* name() { return "splitmix64"; }

 private:
  std::uint64_t seed_;   // kept so substreams do not depend on draw position
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

enum class CovariateLaw { StdNormal, Uniform01, LogNormal };

const char* to_string(CovariateLaw law);
CovariateLaw covariate_law_from_string(const std::string& s);

// One drawn covariate of the data-generating process. LogNormal columns are
// declared with a log transform (so the regressor is standard normal); the
// others enter untransformed. theta is ignored for origin-axis columns.
struct DgpColumn {
  std::string name;
  Axis axis = Axis::Destination;
  CovariateLaw law = CovariateLaw::StdNormal;
  double beta = 0.0;
  double theta = 0.0;
};

struct DgpConfig {
  Index n = 40, m = 10;
  double intercept = 1.0;
  std::vector<DgpColumn> columns;
  bool include_distance = true;  // OD log-distance from the generated geometry
  double beta_distance = -1.0;
  double theta_distance = 0.3;
  double lambda = 0.5;
  double sigma = 1.0;
  double d_c = 120.0;
  double extent = 400.0;  // square side (km) for uniform centroid placement
  std::uint64_t seed = 1;

  static DgpConfig defaults();
  void validate() const;
};

struct TruthRecord {
  std::vector<std::string> names;  // design column order
  Vector values;
  double lambda = 0.0;
  double sigma2 = 0.0;
};

struct SynthInstance {
  StackedDesign design;  // response in log scale
  SpatialWeights weights;
  Centroids centroids;    // destination centroids
  Matrix origin_coords;   // m x 2
  std::vector<CovariateTable> tables;  // raw-scale origin / destination / od tables
  ModelSpec model;
  TruthRecord truth;

  FlowMatrix flows() const;  // exp(response) reshaped to n x m
};

SynthInstance gen_instance(const DgpConfig& cfg);

struct ParamSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage95 = 0.0;  // share of replications whose normal CI covers the truth
};

struct McSummary {
  std::vector<ParamSummary> params;  // coefficients, then lambda, then sigma2
  int replications = 0;
  int failures = 0;                 // non-converged or degenerate fits
  double lr_reject_rate_05 = 0.0;   // share of converged replications with LR p < 0.05
  bool failed = false;              // > 5% non-convergence
  std::string rng = SplitMix64::name();
};

// R independent replications; replication r uses stream seed XOR r. The
// summary is deterministic in (cfg, R) regardless of the thread count.
McSummary mc_study(const DgpConfig& cfg, int replications, int threads = 1);

namespace detail {

// u = (I - lambda W_D)^-1 eps, solved blockwise per origin block.
Vector solve_sdem_errors(const Matrix& w_std, double lambda, const Vector& eps, Index n, Index m);

}  // namespace detail

}  // namespace flowgrav
