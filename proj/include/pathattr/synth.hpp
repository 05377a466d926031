#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pathattr/attribution.hpp"
#include "pathattr/common.hpp"
#include "pathattr/gig.hpp"
#include "pathattr/model.hpp"

namespace pathattr::synth {

// ============================================================================
// Toy probability field
// ============================================================================

// P(class 2 | x) = 1/2 + 1/2 tanh((x2 - centerline(x1)) / delta)
struct ToyFieldSpec {
  double delta = 0.125;
  Polynomial centerline = default_centerline();

  double probability(double x1, double x2) const;
  AnalyticModel as_model() const { return AnalyticModel::tanh_field(delta, centerline); }
};

// ============================================================================
// Samplers
// ============================================================================

// 2D Gaussian whose covariance is diagonal in the frame rotated by 45
// degrees: sigma_major along (1,1)/sqrt(2), sigma_minor along (-1,1)/sqrt(2).
struct GaussianSpec {
  std::array<double, 2> mu{0.0, 0.0};
  double sigma_major = 0.4;
  double sigma_minor = 0.2;
};

enum class SampleSource { Gaussian0, Gaussian1, Uniform };

std::string_view source_name(SampleSource s);

struct LabeledSample {
  double x1 = 0.0;
  double x2 = 0.0;
  int label = 1;  // 1 or 2, drawn Bernoulli from the toy field probability
  SampleSource source = SampleSource::Gaussian0;
};

// n_per_gaussian draws from each of the two Gaussians (sources Gaussian0 and
// Gaussian1, in that order), labels Bernoulli(field probability).
std::vector<LabeledSample> gen_double_gaussian(const GaussianSpec& g0,
                                               const GaussianSpec& g1,
                                               int n_per_gaussian,
                                               const ToyFieldSpec& field, uint64_t seed);

inline GaussianSpec default_gaussian0() { return GaussianSpec{{0.0, 0.0}, 0.4, 0.2}; }
inline GaussianSpec default_gaussian1() { return GaussianSpec{{1.0, 1.0}, 0.4, 0.2}; }

struct Bounds2D {
  double x1_lo = -1.0, x1_hi = 2.0;
  double x2_lo = -1.0, x2_hi = 2.0;
};

std::vector<LabeledSample> gen_uniform_background(int n, const Bounds2D& bounds,
                                                  const ToyFieldSpec& field,
                                                  uint64_t seed);

// ============================================================================
// Extremely randomized trees
// ============================================================================

struct TrainerConfig {
  int n_trees = 100;
  int max_depth = -1;             // -1: unlimited
  int min_samples_split = 2;
  int n_candidate_features = -1;  // -1: all features
  uint64_t seed = 0;
  Exec exec = Exec::Serial;
};

// Each node draws one uniform-random threshold per candidate feature inside
// the node's observed range and keeps the split with the lowest weighted Gini
// impurity. Leaves store the class-2 fraction; the ensemble averages leaf
// fractions (mean aggregation, identity link), so scores live in [0, 1].
// Per-tree seeds are derived from (seed, tree index): the parallel lane
// trains trees concurrently and produces the same ensemble as the serial one.
TreeEnsemble train_extra_trees(const std::vector<LabeledSample>& data,
                               const TrainerConfig& config);

// ============================================================================
// Centerline selection
// ============================================================================

struct CenterlineSelection {
  std::vector<std::array<double, 2>> points;
  // fewer candidates than requested; everything available was returned
  bool truncated = false;
};

// The k class-2 samples within |x1 - x2| < band, picked by greedy
// farthest-point selection on the projection onto the line x2 = x1 so the
// chosen set spreads out along it.
CenterlineSelection select_centerline_points(const std::vector<LabeledSample>& data,
                                             int k = 20, double band = 0.05);

// ============================================================================
// Attribution-ratio experiment
// ============================================================================

struct ExperimentConfig {
  std::vector<int> background_counts{0, 25, 100, 200};
  std::vector<uint64_t> seeds{7};
  int n_per_gaussian = 300;
  GaussianSpec gaussian0 = default_gaussian0();
  GaussianSpec gaussian1 = default_gaussian1();
  Bounds2D bounds;
  ToyFieldSpec field;
  TrainerConfig trainer;
  int n_points = 20;
  double band = 0.05;
  double target_stderr = 1e-3;
  Exec exec = Exec::Serial;
};

struct ExperimentRow {
  int background_n = 0;
  uint64_t seed = 0;
  int point_idx = 0;
  double x1 = 0.0, x2 = 0.0;
  Method method = Method::Gig;
  double phi1 = 0.0, phi2 = 0.0;
  double ratio = 0.0;  // phi1/phi2; NaN when flagged unstable
  double stderr1 = 0.0, stderr2 = 0.0;
  double efficiency_residual = 0.0;
  bool converged = false;
  bool unstable = false;  // |phi2| below 1e-6 of the score change
};

// For each (background count, seed): sample 600 Gaussian points plus the
// background, train, pick the centerline points from the Gaussian samples,
// and attribute every point with expected GIG and expected exact
// interventional Shapley against the 600-point Gaussian-only reference set.
// Rows come out in deterministic (background, seed, point, method) order.
std::vector<ExperimentRow> run_ratio_experiment(const ExperimentConfig& config);

// Median/max ratio over one (background, seed, method) cell, unstable rows
// excluded.
struct RatioSummary {
  double median_ratio = 0.0;
  double max_ratio = 0.0;
  int n_stable = 0;
};

RatioSummary summarize_ratios(const std::vector<ExperimentRow>& rows, int background_n,
                              uint64_t seed, Method method);

}  // namespace pathattr::synth
